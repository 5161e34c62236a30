#include "ecopool/policy.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace ecopool {

namespace {

std::vector<Dense> zero_head(int input, const std::vector<int>& hidden, int output) {
    std::vector<Dense> head;
    int fan_in = input;
    auto add = [&](int fan_out) {
        head.push_back({Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)});
        fan_in = fan_out;
    };
    for (int h : hidden) add(h);
    add(output);
    return head;
}

// Activations per layer: acts[0] is the input, acts[i] the output of layer i-1.
// Hidden layers are tanh, the last layer is linear.
std::vector<Eigen::MatrixXd> run_head(const std::vector<Dense>& head, const Eigen::MatrixXd& input) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(head.size() + 1);
    acts.push_back(input);
    for (std::size_t i = 0; i < head.size(); ++i) {
        Eigen::MatrixXd z = head[i].weight * acts.back();
        z.colwise() += head[i].bias;
        if (i + 1 < head.size()) z = z.array().tanh().matrix();
        acts.push_back(std::move(z));
    }
    return acts;
}

void backprop_head(const std::vector<Dense>& head, const std::vector<Eigen::MatrixXd>& acts,
                   Eigen::MatrixXd delta, std::vector<Dense>& grads) {
    for (std::size_t i = head.size(); i-- > 0;) {
        grads[i].weight.noalias() = delta * acts[i].transpose();
        grads[i].bias = delta.rowwise().sum();
        if (i == 0) break;
        Eigen::MatrixXd back = head[i].weight.transpose() * delta;
        delta = back.array() * (1.0 - acts[i].array().square());
    }
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what);
}

struct LossTerms {
    double loss = 0.0;
    double surrogate = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double mean_ratio = 0.0;
    Eigen::MatrixXd d_logits;  // actions x batch
    Eigen::MatrixXd d_values;  // 1 x batch
    std::vector<Eigen::MatrixXd> actor_acts;
    std::vector<Eigen::MatrixXd> critic_acts;
};

LossTerms evaluate_loss(const PolicyParams& params, const Minibatch& batch, const LossSpec& spec,
                        bool want_grad) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) throw std::invalid_argument("empty minibatch");
    if (batch.features.cols() != n || batch.old_log_probs.size() != n || batch.advantages.size() != n ||
        batch.returns.size() != n)
        throw std::invalid_argument("minibatch fields are not congruent");

    LossTerms t;
    t.actor_acts = run_head(params.actor, batch.features);
    t.critic_acts = run_head(params.critic, batch.features);
    const Eigen::MatrixXd& logits = t.actor_acts.back();
    const Eigen::MatrixXd& values = t.critic_acts.back();
    const auto n_actions = logits.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    if (want_grad) {
        t.d_logits.resize(n_actions, n);
        t.d_values.resize(1, n);
    }

    Eigen::VectorXd log_p(n_actions);
    for (Eigen::Index b = 0; b < n; ++b) {
        const double max_z = logits.col(b).maxCoeff();
        const double lse = max_z + std::log((logits.col(b).array() - max_z).exp().sum());
        log_p = logits.col(b).array() - lse;
        const Eigen::VectorXd p = log_p.array().exp();
        const double entropy = -(p.array() * log_p.array()).sum();

        const int a = batch.actions[static_cast<std::size_t>(b)];
        const double ratio = std::exp(log_p(a) - batch.old_log_probs(b));
        const double adv = batch.advantages(b);
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - spec.clip_epsilon, 1.0 + spec.clip_epsilon) * adv;
        const double surr = std::min(unclipped, clipped);
        assert(surr <= unclipped);

        const double v = values(0, b);
        const double err = v - batch.returns(b);

        t.surrogate += surr * inv_n;
        t.value_loss += err * err * inv_n;
        t.entropy += entropy * inv_n;
        t.mean_ratio += ratio * inv_n;
        if (std::abs(ratio - 1.0) > spec.clip_epsilon) t.clip_fraction += inv_n;

        if (want_grad) {
            // d(surr)/d(log pi(a)) is ratio * A on the unclipped branch and 0 when the clip binds.
            const double g_surr = unclipped <= clipped ? unclipped : 0.0;
            for (Eigen::Index j = 0; j < n_actions; ++j) {
                const double onehot = j == a ? 1.0 : 0.0;
                t.d_logits(j, b) = inv_n * (-g_surr * (onehot - p(j)) +
                                            spec.entropy_coef * p(j) * (log_p(j) + entropy));
            }
            t.d_values(0, b) = inv_n * spec.value_coef * 2.0 * err;
        }
    }
    t.loss = -t.surrogate + spec.value_coef * t.value_loss - spec.entropy_coef * t.entropy;
    require_finite(t.loss, "loss");
    return t;
}

void append_le(std::string& out, const void* data, std::size_t n) {
    static_assert(std::endian::native == std::endian::little, "serialization assumes little-endian host");
    out.append(static_cast<const char*>(data), n);
}

}  // namespace

Architecture PolicyParams::architecture() const {
    Architecture arch;
    arch.hidden.clear();
    if (actor.empty()) return arch;
    arch.input = static_cast<int>(actor.front().weight.cols());
    for (std::size_t i = 0; i + 1 < actor.size(); ++i) arch.hidden.push_back(static_cast<int>(actor[i].weight.rows()));
    arch.actions = static_cast<int>(actor.back().weight.rows());
    return arch;
}

std::size_t PolicyParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto* head : {&actor, &critic})
        for (const Dense& d : *head) n += static_cast<std::size_t>(d.weight.size() + d.bias.size());
    return n;
}

PolicyParams zero_params(const Architecture& arch) {
    if (arch.actions != kNumActions) throw std::invalid_argument("policy must have exactly 3 actions");
    return {zero_head(arch.input, arch.hidden, arch.actions), zero_head(arch.input, arch.hidden, 1)};
}

PolicyParams zeros_like(const PolicyParams& p) {
    PolicyParams z = p;
    z.for_each([](double& v) { v = 0.0; });
    return z;
}

PolicyParams init_params(std::uint64_t seed, const Architecture& arch) {
    PolicyParams p = zero_params(arch);
    Rng rng(derive_seed(seed, "policy-init"));
    for (auto* head : {&p.actor, &p.critic})
        for (Dense& layer : *head) {
            const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
        }
    return p;
}

Eigen::VectorXd encode_observation(const Observation& obs) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(kObsSize);
    for (int i = 0; i < kObsSize; i += kObsChannels)
        x(i) = static_cast<double>(obs.codes[static_cast<std::size_t>(i)]) / kObjectCodeMax;
    return x;
}

Action ActionDistribution::greedy() const {
    return static_cast<Action>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double ActionDistribution::log_prob(Action a) const { return log_probs[static_cast<std::size_t>(a)]; }

PolicyOutput forward_features(const PolicyParams& params, const Eigen::VectorXd& features) {
    const auto actor = run_head(params.actor, features);
    const auto critic = run_head(params.critic, features);
    const Eigen::VectorXd logits = actor.back().col(0);
    if (logits.size() != kNumActions) throw std::invalid_argument("actor head must have 3 outputs");

    const double max_z = logits.maxCoeff();
    const double lse = max_z + std::log((logits.array() - max_z).exp().sum());
    require_finite(lse, "logits");
    PolicyOutput out;
    for (std::size_t i = 0; i < kNumActions; ++i) {
        out.dist.log_probs[i] = logits(static_cast<Eigen::Index>(i)) - lse;
        out.dist.probs[i] = std::exp(out.dist.log_probs[i]);
    }
    out.value = critic.back()(0, 0);
    require_finite(out.value, "value estimate");
    return out;
}

PolicyOutput forward(const PolicyParams& params, const Observation& obs) {
    return forward_features(params, encode_observation(obs));
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
    const double u = rng.uniform01();
    double cdf = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
        cdf += dist.probs[static_cast<std::size_t>(i)];
        if (u < cdf) return static_cast<Action>(i);
    }
    // u landed in the rounding slack above the last partial sum.
    for (int i = kNumActions - 1; i >= 0; --i)
        if (dist.probs[static_cast<std::size_t>(i)] > 0.0) return static_cast<Action>(i);
    return Action::Forward;
}

double loss_value(const PolicyParams& params, const Minibatch& batch, const LossSpec& spec) {
    return evaluate_loss(params, batch, spec, false).loss;
}

LossResult grad_loss(const PolicyParams& params, const Minibatch& batch, const LossSpec& spec) {
    LossTerms t = evaluate_loss(params, batch, spec, true);
    LossResult r;
    r.loss = t.loss;
    r.surrogate = t.surrogate;
    r.value_loss = t.value_loss;
    r.entropy = t.entropy;
    r.clip_fraction = t.clip_fraction;
    r.mean_ratio = t.mean_ratio;
    r.grads = zeros_like(params);
    backprop_head(params.actor, t.actor_acts, std::move(t.d_logits), r.grads.actor);
    backprop_head(params.critic, t.critic_acts, std::move(t.d_values), r.grads.critic);
    r.grads.for_each([](double v) { require_finite(v, "gradient"); });
    return r;
}

double global_norm(const Gradients& g) {
    double sq = 0.0;
    for (const auto* head : {&g.actor, &g.critic})
        for (const Dense& d : *head) sq += d.weight.squaredNorm() + d.bias.squaredNorm();
    return std::sqrt(sq);
}

void scale_in_place(Gradients& g, double factor) {
    for (auto* head : {&g.actor, &g.critic})
        for (Dense& d : *head) {
            d.weight *= factor;
            d.bias *= factor;
        }
}

void adam_step(PolicyParams& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
    if (state.steps == 0) {
        state.first_moment = zeros_like(params);
        state.second_moment = zeros_like(params);
    }
    state.steps += 1;
    const double t = static_cast<double>(state.steps);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);

    auto update = [&](auto& w, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        w.array() -= cfg.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.epsilon);
    };
    auto head_pairs = [&](std::vector<Dense>& p, const std::vector<Dense>& g, std::vector<Dense>& m,
                          std::vector<Dense>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            update(p[i].weight, g[i].weight, m[i].weight, v[i].weight);
            update(p[i].bias, g[i].bias, m[i].bias, v[i].bias);
        }
    };
    head_pairs(params.actor, grads.actor, state.first_moment.actor, state.second_moment.actor);
    head_pairs(params.critic, grads.critic, state.first_moment.critic, state.second_moment.critic);
}

std::string serialize_params(const PolicyParams& params) {
    const Architecture arch = params.architecture();
    nlohmann::json arch_list = nlohmann::json::array({arch.input});
    for (int h : arch.hidden) arch_list.push_back(h);
    const nlohmann::json header = {
        {"arch", arch_list},
        {"heads", {{"actor", arch.actions}, {"critic", 1}}},
        {"version", 1},
    };
    const std::string header_text = header.dump();

    std::string out = "ECOPARAM";
    const std::uint32_t version = 1;
    const auto header_len = static_cast<std::uint32_t>(header_text.size());
    append_le(out, &version, sizeof version);
    append_le(out, &header_len, sizeof header_len);
    out += header_text;
    out.reserve(out.size() + params.parameter_count() * sizeof(double));
    params.for_each([&](double v) { append_le(out, &v, sizeof v); });
    return out;
}

PolicyParams deserialize_params(const std::string& bytes) {
    constexpr std::size_t kPrefix = 8 + 4 + 4;
    if (bytes.size() < kPrefix || bytes.compare(0, 8, "ECOPARAM") != 0)
        throw std::runtime_error("not a policy parameter file");
    std::uint32_t version = 0;
    std::uint32_t header_len = 0;
    std::memcpy(&version, bytes.data() + 8, 4);
    std::memcpy(&header_len, bytes.data() + 12, 4);
    if (version != 1) throw std::runtime_error("unsupported policy parameter version " + std::to_string(version));
    if (bytes.size() < kPrefix + header_len) throw std::runtime_error("truncated policy parameter header");

    const auto header = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
    const auto arch_list = header.at("arch").get<std::vector<int>>();
    if (arch_list.empty()) throw std::runtime_error("policy header has empty arch");
    Architecture arch;
    arch.input = arch_list.front();
    arch.hidden.assign(arch_list.begin() + 1, arch_list.end());
    arch.actions = header.at("heads").at("actor").get<int>();

    PolicyParams p = zero_params(arch);
    const std::size_t expected = kPrefix + header_len + p.parameter_count() * sizeof(double);
    if (bytes.size() != expected) throw std::runtime_error("policy parameter payload has wrong size");
    std::size_t offset = kPrefix + header_len;
    p.for_each([&](double& v) {
        std::memcpy(&v, bytes.data() + offset, sizeof v);
        offset += sizeof v;
    });
    return p;
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const std::string bytes = serialize_params(params);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

PolicyParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return deserialize_params(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::uint64_t params_fingerprint(const PolicyParams& params) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : serialize_params(params)) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace ecopool
