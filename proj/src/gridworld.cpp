#include "ecopool/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "ecopool/rng.hpp"

namespace ecopool {

Cell step_vector(Direction d) {
    switch (d) {
        case Direction::N: return {0, -1};
        case Direction::E: return {1, 0};
        case Direction::S: return {0, 1};
        case Direction::W: return {-1, 0};
    }
    throw std::logic_error("bad direction");
}

char direction_letter(Direction d) {
    static constexpr char kLetters[] = {'N', 'E', 'S', 'W'};
    return kLetters[static_cast<int>(d)];
}

Direction direction_from_letter(char c) {
    switch (c) {
        case 'N': return Direction::N;
        case 'E': return Direction::E;
        case 'S': return Direction::S;
        case 'W': return Direction::W;
        default: throw std::invalid_argument(std::string("unknown direction '") + c + "'");
    }
}

namespace {

Direction rotate(Direction d, int quarter_turns) {
    return static_cast<Direction>((static_cast<int>(d) + quarter_turns + 4) % 4);
}

char agent_glyph(Direction d) {
    static constexpr char kGlyphs[] = {'^', '>', 'v', '<'};
    return kGlyphs[static_cast<int>(d)];
}

std::size_t index_of(const Level& level, Cell c) {
    return static_cast<std::size_t>(c.y * level.width + c.x);
}

Cell draw_open_cell(const Level& level, Rng& rng) {
    std::vector<Cell> open;
    for (int y = 0; y < level.height; ++y)
        for (int x = 0; x < level.width; ++x)
            if (!level.is_wall({x, y})) open.push_back({x, y});
    return open[rng.below(open.size())];
}

}  // namespace

std::vector<Cell> Level::walls() const {
    std::vector<Cell> out;
    for (int x = 0; x < width; ++x)
        for (int y = 0; y < height; ++y)
            if (is_wall({x, y})) out.push_back({x, y});
    return out;
}

void validate_level_config(const LevelConfig& cfg) {
    if (cfg.width < 9 || cfg.height < 9)
        throw std::invalid_argument("level width and height must be >= 9");
    if (cfg.width % 2 == 0 || cfg.height % 2 == 0)
        throw std::invalid_argument("level width and height must be odd");
    if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
}

Level generate_level(std::uint64_t seed, const LevelConfig& cfg) {
    validate_level_config(cfg);

    Level level;
    level.seed = seed;
    level.width = cfg.width;
    level.height = cfg.height;
    level.max_steps = cfg.max_steps;
    level.wall_mask.assign(static_cast<std::size_t>(cfg.width * cfg.height), 0);

    auto set_wall = [&](int x, int y, std::uint8_t v) { level.wall_mask[index_of(level, {x, y})] = v; };
    for (int x = 0; x < cfg.width; ++x) {
        set_wall(x, 0, 1);
        set_wall(x, cfg.height - 1, 1);
    }
    for (int y = 0; y < cfg.height; ++y) {
        set_wall(0, y, 1);
        set_wall(cfg.width - 1, y, 1);
    }

    // Rooms are at least two cells across: wall lines live in [3, size - 4].
    Rng vwall_rng(derive_seed(seed, "vertical-wall"));
    Rng hwall_rng(derive_seed(seed, "horizontal-wall"));
    const int wall_x = static_cast<int>(vwall_rng.between(3, cfg.width - 4));
    const int wall_y = static_cast<int>(hwall_rng.between(3, cfg.height - 4));
    for (int y = 1; y < cfg.height - 1; ++y) set_wall(wall_x, y, 1);
    for (int x = 1; x < cfg.width - 1; ++x) set_wall(x, wall_y, 1);

    // Segment cells exclude the boundary and the crossing, so every cell of a
    // segment is a valid (non-corner) gap.
    Rng gap_upper(derive_seed(seed, "gap-upper"));
    Rng gap_lower(derive_seed(seed, "gap-lower"));
    Rng gap_left(derive_seed(seed, "gap-left"));
    Rng gap_right(derive_seed(seed, "gap-right"));
    level.gaps = {
        {wall_x, static_cast<int>(gap_upper.between(1, wall_y - 1))},
        {wall_x, static_cast<int>(gap_lower.between(wall_y + 1, cfg.height - 2))},
        {static_cast<int>(gap_left.between(1, wall_x - 1)), wall_y},
        {static_cast<int>(gap_right.between(wall_x + 1, cfg.width - 2)), wall_y},
    };
    for (Cell g : level.gaps) set_wall(g.x, g.y, 0);

    Rng start_rng(derive_seed(seed, "start"));
    Rng dir_rng(derive_seed(seed, "direction"));
    Rng goal_rng(derive_seed(seed, "goal"));
    level.start = draw_open_cell(level, start_rng);
    level.start_dir = static_cast<Direction>(dir_rng.below(4));

    constexpr int kMaxGoalDraws = 1000;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxGoalDraws; ++attempt) {
        level.goal = draw_open_cell(level, goal_rng);
        if (level.goal != level.start) {
            placed = true;
            break;
        }
    }
    if (!placed) throw std::runtime_error("could not place goal distinct from start");
    if (!goal_reachable(level)) throw std::runtime_error("generated level has unreachable goal");
    return level;
}

bool goal_reachable(const Level& level) {
    std::vector<std::uint8_t> seen(level.wall_mask.size(), 0);
    std::deque<Cell> frontier{level.start};
    seen[index_of(level, level.start)] = 1;
    while (!frontier.empty()) {
        Cell c = frontier.front();
        frontier.pop_front();
        if (c == level.goal) return true;
        for (int d = 0; d < 4; ++d) {
            Cell v = step_vector(static_cast<Direction>(d));
            Cell n{c.x + v.x, c.y + v.y};
            if (!level.in_bounds(n) || level.is_wall(n) || seen[index_of(level, n)]) continue;
            seen[index_of(level, n)] = 1;
            frontier.push_back(n);
        }
    }
    return false;
}

Observation observe(const EnvState& state) {
    const Level& level = *state.level;
    const Cell fwd = step_vector(state.agent_dir);
    const Cell right = step_vector(rotate(state.agent_dir, 1));

    Observation obs;
    for (int row = 0; row < kViewSize; ++row) {
        const int ahead = Observation::kAgentRow - row;
        for (int col = 0; col < kViewSize; ++col) {
            const int lateral = col - Observation::kAgentCol;
            const Cell c{state.agent_pos.x + ahead * fwd.x + lateral * right.x,
                         state.agent_pos.y + ahead * fwd.y + lateral * right.y};
            ObjectCode code = ObjectCode::Unseen;
            if (level.in_bounds(c)) {
                if (level.is_wall(c))
                    code = ObjectCode::Wall;
                else if (c == level.goal)
                    code = ObjectCode::Goal;
                else
                    code = ObjectCode::Empty;
            }
            obs.codes[static_cast<std::size_t>((row * kViewSize + col) * kObsChannels)] =
                static_cast<std::uint8_t>(code);
        }
    }
    return obs;
}

ResetResult reset(const Level& level) {
    EnvState s;
    s.level = &level;
    s.agent_pos = level.start;
    s.agent_dir = level.start_dir;
    return {s, observe(s)};
}

double goal_reward(int steps_used, int max_steps) {
    // 1 - 0.9 * steps / max as one exact-integer ratio, so the result is the
    // correctly rounded value (0.1 at steps == max, not 0.09999999999999998).
    const auto den = 10 * static_cast<std::int64_t>(max_steps);
    const auto num = den - 9 * static_cast<std::int64_t>(steps_used);
    return static_cast<double>(num) / static_cast<double>(den);
}

StepResult step(const EnvState& state, Action action) {
    if (state.done) throw std::logic_error("step called on a finished episode");
    const Level& level = *state.level;

    EnvState next = state;
    switch (action) {
        case Action::TurnLeft: next.agent_dir = rotate(state.agent_dir, -1); break;
        case Action::TurnRight: next.agent_dir = rotate(state.agent_dir, 1); break;
        case Action::Forward: {
            const Cell v = step_vector(state.agent_dir);
            const Cell target{state.agent_pos.x + v.x, state.agent_pos.y + v.y};
            if (level.in_bounds(target) && !level.is_wall(target)) next.agent_pos = target;
            break;
        }
    }
    next.steps_used += 1;

    double reward = 0.0;
    if (next.agent_pos == level.goal) {
        next.done = true;
        reward = goal_reward(next.steps_used, level.max_steps);
    } else if (next.steps_used >= level.max_steps) {
        next.done = true;
    }
    return {next, observe(next), reward, next.done};
}

std::string render_ascii(const EnvState& state) {
    const Level& level = *state.level;
    std::string out;
    out.reserve(static_cast<std::size_t>((level.width + 1) * level.height));
    for (int y = 0; y < level.height; ++y) {
        for (int x = 0; x < level.width; ++x) {
            const Cell c{x, y};
            if (c == state.agent_pos)
                out += agent_glyph(state.agent_dir);
            else if (level.is_wall(c))
                out += '#';
            else if (c == level.goal)
                out += 'G';
            else
                out += '.';
        }
        out += '\n';
    }
    return out;
}

ParsedAscii parse_ascii(std::string_view text, int max_steps, std::uint64_t seed) {
    std::vector<std::string> rows;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) rows.push_back(line);
    }
    if (rows.empty()) throw std::invalid_argument("empty ascii map");

    Level level;
    level.seed = seed;
    level.height = static_cast<int>(rows.size());
    level.width = static_cast<int>(rows.front().size());
    level.max_steps = max_steps;
    level.wall_mask.assign(static_cast<std::size_t>(level.width * level.height), 0);

    bool have_agent = false;
    bool have_goal = false;
    for (int y = 0; y < level.height; ++y) {
        if (static_cast<int>(rows[y].size()) != level.width)
            throw std::invalid_argument("ragged ascii map at row " + std::to_string(y));
        for (int x = 0; x < level.width; ++x) {
            const char ch = rows[y][x];
            switch (ch) {
                case '#': level.wall_mask[index_of(level, {x, y})] = 1; break;
                case '.': break;
                case 'G':
                    level.goal = {x, y};
                    have_goal = true;
                    break;
                case '^':
                case '>':
                case 'v':
                case '<':
                    level.start = {x, y};
                    level.start_dir = ch == '^'   ? Direction::N
                                      : ch == '>' ? Direction::E
                                      : ch == 'v' ? Direction::S
                                                  : Direction::W;
                    have_agent = true;
                    break;
                default:
                    throw std::invalid_argument(std::string("unknown map glyph '") + ch + "'");
            }
        }
    }
    if (!have_agent) throw std::invalid_argument("ascii map has no agent");
    if (!have_goal) throw std::invalid_argument("ascii map has no goal");
    return {std::move(level)};
}

nlohmann::json level_to_json(const Level& level) {
    nlohmann::json walls = nlohmann::json::array();
    for (Cell c : level.walls()) walls.push_back({c.x, c.y});
    return {
        {"seed", level.seed},
        {"width", level.width},
        {"height", level.height},
        {"max_steps", level.max_steps},
        {"walls", std::move(walls)},
        {"start", {level.start.x, level.start.y}},
        {"dir", std::string(1, direction_letter(level.start_dir))},
        {"goal", {level.goal.x, level.goal.y}},
    };
}

Level level_from_json(const nlohmann::json& j) {
    Level level;
    level.seed = j.at("seed").get<std::uint64_t>();
    level.width = j.at("width").get<int>();
    level.height = j.at("height").get<int>();
    level.max_steps = j.at("max_steps").get<int>();
    if (level.width < 1 || level.height < 1 || level.max_steps < 1)
        throw std::invalid_argument("level json: non-positive dimension or max_steps");
    level.wall_mask.assign(static_cast<std::size_t>(level.width * level.height), 0);
    for (const auto& w : j.at("walls")) {
        Cell c{w.at(0).get<int>(), w.at(1).get<int>()};
        if (!level.in_bounds(c)) throw std::invalid_argument("level json: wall out of bounds");
        level.wall_mask[index_of(level, c)] = 1;
    }
    const auto& s = j.at("start");
    const auto& g = j.at("goal");
    level.start = {s.at(0).get<int>(), s.at(1).get<int>()};
    level.goal = {g.at(0).get<int>(), g.at(1).get<int>()};
    const auto dir = j.at("dir").get<std::string>();
    if (dir.size() != 1) throw std::invalid_argument("level json: bad dir");
    level.start_dir = direction_from_letter(dir[0]);
    return level;
}

}  // namespace ecopool
