#pragma once

// Procedurally generated FourRooms gridworld.
//
// Coordinates are (x, y) with x growing east and y growing south; (0, 0) is
// the north-west corner. All functions here are pure.

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ecopool {

struct Cell {
    int x = 0;
    int y = 0;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Direction : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

Cell step_vector(Direction d);
char direction_letter(Direction d);
Direction direction_from_letter(char c);

enum class Action : std::uint8_t { TurnLeft = 0, TurnRight = 1, Forward = 2 };
inline constexpr int kNumActions = 3;

struct LevelConfig {
    int width = 9;
    int height = 9;
    int max_steps = 100;
    friend bool operator==(const LevelConfig&, const LevelConfig&) = default;
};

/// Throws std::invalid_argument when the config cannot describe a FourRooms map.
void validate_level_config(const LevelConfig& cfg);

/// An immutable map plus start pose, goal and step budget.
struct Level {
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
    int max_steps = 0;
    std::vector<std::uint8_t> wall_mask;  // row-major, 1 = wall
    std::vector<Cell> gaps;               // one door per internal wall segment (generated levels)
    Cell start;
    Direction start_dir = Direction::N;
    Cell goal;

    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    bool is_wall(Cell c) const { return wall_mask[static_cast<std::size_t>(c.y * width + c.x)] != 0; }
    /// Wall cells in lexicographic (x, y) order.
    std::vector<Cell> walls() const;

    friend bool operator==(const Level&, const Level&) = default;
};

/// Deterministic FourRooms generation.
///
/// Every random choice is drawn from its own stream derived from the seed, in
/// this order of definition: vertical wall x, horizontal wall y, the four
/// gaps (upper, lower, left, right segment), start cell, start direction,
/// goal cell. Walls are placed so that every room is at least two cells wide.
/// Start and goal are uniform over non-wall cells; the goal is re-drawn until
/// it differs from the start (at most 1000 draws).
Level generate_level(std::uint64_t seed, const LevelConfig& cfg);

/// 4-connected reachability from start to goal through non-wall cells.
bool goal_reachable(const Level& level);

/// Episode state. `level` is non-owning; the Level must outlive the state.
struct EnvState {
    const Level* level = nullptr;
    Cell agent_pos;
    Direction agent_dir = Direction::N;
    int steps_used = 0;
    bool done = false;

    friend bool operator==(const EnvState& a, const EnvState& b) {
        return a.level == b.level && a.agent_pos == b.agent_pos && a.agent_dir == b.agent_dir &&
               a.steps_used == b.steps_used && a.done == b.done;
    }
};

/// Object-type codes for channel 0 of the observation.
enum class ObjectCode : std::uint8_t { Unseen = 0, Empty = 1, Wall = 2, Goal = 3 };
inline constexpr int kViewSize = 7;
inline constexpr int kObsChannels = 3;
inline constexpr int kObsSize = kViewSize * kViewSize * kObsChannels;  // 147
inline constexpr int kObjectCodeMax = 3;

/// Egocentric 7x7x3 view.
///
/// Row 0 is the farthest row ahead, row 6 the agent's own row; column 3 is
/// the agent's column, columns 0..2 are to its left. Flat layout is
/// (row * 7 + col) * 3 + channel. Channels 1 (color) and 2 (state) are always 0.
struct Observation {
    std::array<std::uint8_t, kObsSize> codes{};

    static constexpr int kAgentRow = kViewSize - 1;
    static constexpr int kAgentCol = kViewSize / 2;

    std::uint8_t at(int row, int col, int channel) const {
        return codes[static_cast<std::size_t>((row * kViewSize + col) * kObsChannels + channel)];
    }
    ObjectCode object(int row, int col) const { return static_cast<ObjectCode>(at(row, col, 0)); }

    friend bool operator==(const Observation&, const Observation&) = default;
};

Observation observe(const EnvState& state);

struct ResetResult {
    EnvState state;
    Observation observation;
};
ResetResult reset(const Level& level);

struct StepResult {
    EnvState state;
    Observation observation;
    double reward = 0.0;
    bool done = false;
};

/// Success reward: 1 - 0.9 * steps_used / max_steps.
double goal_reward(int steps_used, int max_steps);

/// Throws std::logic_error when `state` is already done.
StepResult step(const EnvState& state, Action action);

/// '#' wall, '.' empty, 'G' goal, '^' '>' 'v' '<' agent. One line per row.
std::string render_ascii(const EnvState& state);

struct ParsedAscii {
    Level level;  // start pose taken from the agent glyph
};
/// Inverse of render_ascii. The agent glyph is required, 'G' is required.
ParsedAscii parse_ascii(std::string_view text, int max_steps, std::uint64_t seed = 0);

nlohmann::json level_to_json(const Level& level);
/// Rebuilds a Level from its canonical JSON. Gaps are not part of the format.
Level level_from_json(const nlohmann::json& j);

}  // namespace ecopool
