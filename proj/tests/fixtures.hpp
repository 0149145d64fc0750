#pragma once

// Reference rank columns for the two validation suites: a 16-dataset
// industrial-benchmark sweep and a 12-dataset d4rl MuJoCo sweep. Each row
// carries the ERI, EAS, COI, and TRI ranks (ascending, n-1 = best). The COI
// column is what coi_combine must reproduce from the ERI and EAS columns;
// the TRI column is the ground-truth ordering the others are validated
// against.

#include <string>
#include <vector>

namespace fixtures {

struct Row {
    const char* name;
    int eri, eas, coi, tri;
};

inline constexpr Row kIndustrial[] = {
    {"bad-0.2", 15, 3, 10, 15},
    {"bad-0.4", 14, 5, 11, 14},
    {"bad-0.6", 13, 8, 12, 13},
    {"bad-0.0", 8, 0, 5, 12},
    {"bad-0.8", 12, 14, 15, 11},
    {"mediocre-1.0", 11, 12, 13, 10},
    {"mediocre-0.6", 9, 13, 9, 9},
    {"mediocre-0.8", 10, 15, 14, 8},
    {"optimized-0.8", 6, 11, 8, 7},
    {"mediocre-0.4", 5, 10, 7, 6},
    {"mediocre-0.2", 7, 6, 6, 5},
    {"optimized-0.4", 2, 7, 3, 4},
    {"optimized-0.0", 0, 1, 0, 3},
    {"optimized-0.2", 1, 4, 1, 2},
    {"optimized-0.6", 3, 9, 4, 1},
    {"mediocre-0.0", 4, 2, 2, 0},
};

inline constexpr Row kMujoco[] = {
    {"halfcheetah_random", 5, 10, 8, 11},
    {"walker_random", 3, 11, 7, 10},
    {"walker_medium", 11, 3, 9, 9},
    {"walker_medium_expert", 10, 7, 11, 8},
    {"walker_mixed", 9, 8, 10, 7},
    {"hopper_mixed", 7, 2, 5, 6},
    {"hopper_medium", 8, 0, 4, 5},
    {"halfcheetah_mixed", 4, 6, 3, 4},
    {"hopper_medium_expert", 6, 5, 6, 3},
    {"halfcheetah_medium", 0, 4, 1, 2},
    {"hopper_random", 1, 1, 0, 1},
    {"halfcheetah_medium_expert", 2, 9, 2, 0},
};

template <std::size_t N>
inline std::vector<std::string> names(const Row (&rows)[N]) {
    std::vector<std::string> out;
    for (const Row& r : rows) out.emplace_back(r.name);
    return out;
}

template <std::size_t N>
inline std::vector<int> column(const Row (&rows)[N], int Row::*field) {
    std::vector<int> out;
    for (const Row& r : rows) out.push_back(r.*field);
    return out;
}

}  // namespace fixtures
