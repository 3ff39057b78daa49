#pragma once

// The 22 prefetcher rows of the unity table: (accuracy, coverage, hit rate,
// printed unity), UVMSmart tree runtime first, then the revised predictor.

#include <array>

struct UnityRow {
    const char* benchmark;
    char prefetcher;  // 'U' or 'R'
    double acc, cov, hit, unity;
};

inline constexpr std::array<UnityRow, 22> kUnityRows = {{
    {"AddVectors", 'U', 1.00, 1.00, 0.78, 0.92},
    {"ATAX", 'U', 0.89, 1.00, 0.98, 0.96},
    {"Backprop", 'U', 0.81, 1.00, 0.73, 0.84},
    {"BICG", 'U', 0.99, 1.00, 0.94, 0.98},
    {"Hotspot", 'U', 0.56, 1.00, 0.61, 0.70},
    {"MVT", 'U', 0.51, 1.00, 0.50, 0.63},
    {"NW", 'U', 0.99, 1.00, 0.99, 0.99},
    {"Pathfinder", 'U', 0.99, 1.00, 0.59, 0.84},
    {"Srad-v2", 'U', 0.79, 1.00, 0.86, 0.88},
    {"StreamTriad", 'U', 0.51, 1.00, 0.56, 0.66},
    {"2DCONV", 'U', 0.99, 1.00, 0.81, 0.93},
    {"AddVectors", 'R', 1.00, 0.96, 0.94, 0.97},
    {"ATAX", 'R', 0.90, 0.88, 0.98, 0.92},
    {"Backprop", 'R', 0.87, 0.99, 0.96, 0.94},
    {"BICG", 'R', 0.99, 0.99, 0.99, 0.99},
    {"Hotspot", 'R', 0.68, 0.99, 0.84, 0.83},
    {"MVT", 'R', 0.88, 0.53, 0.51, 0.62},
    {"NW", 'R', 0.99, 0.98, 0.99, 0.99},
    {"Pathfinder", 'R', 0.99, 0.99, 0.99, 0.99},
    {"Srad-v2", 'R', 0.87, 0.96, 0.94, 0.92},
    {"StreamTriad", 'R', 0.68, 0.92, 0.68, 0.75},
    {"2DCONV", 'R', 0.97, 0.98, 0.95, 0.97},
}};
