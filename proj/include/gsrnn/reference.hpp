#pragma once

// Published reference values for the ten HHS regions (CDC wILI, test weeks
// 2013:3 through 2015:32). These are quoted results, never recomputed; the
// evaluation report lists them next to computed rows, labelled as such.

#include <array>
#include <string_view>

namespace gsrnn::reference {

struct RmseRow {
  std::string_view method;
  std::array<double, 10> rmse;  // nodes 1..10
};

// Node-wise RMSE of one-week-ahead forecasts.
inline constexpr std::array<RmseRow, 4> kForecastRmse{{
    {"AR(3)", {0.242, 0.383, 0.481, 0.415, 0.345, 0.797, 0.401, 0.305, 0.356, 0.317}},
    {"ARGO", {0.281, 0.379, 0.397, 0.335, 0.285, 0.673, 0.449, 0.244, 0.356, 0.310}},
    {"LSTM", {0.271, 0.364, 0.487, 0.349, 0.328, 0.751, 0.421, 0.333, 0.335, 0.310}},
    {"GSRNN", {0.223, 0.354, 0.374, 0.320, 0.289, 0.664, 0.361, 0.275, 0.284, 0.303}},
}};

// Node-wise RMSE after hard thresholding at 1e-3 (penalty alpha = 5e-8, a = 1).
inline constexpr std::array<RmseRow, 3> kThresholdedRmse{{
    {"GSRNN alpha=0", {0.230, 0.351, 0.390, 0.334, 0.314, 0.676, 0.380, 0.297, 0.287, 0.316}},
    {"GSRNN l1", {0.234, 0.351, 0.388, 0.327, 0.306, 0.685, 0.363, 0.290, 0.281, 0.296}},
    {"GSRNN tl1", {0.225, 0.363, 0.379, 0.328, 0.296, 0.690, 0.365, 0.272, 0.311, 0.305}},
}};

struct SparsityRow {
  std::string_view penalty;
  std::array<double, 5> percent_below_1e3;
};

// Percentage of weights with |w| < 1e-3, five published columns.
inline constexpr std::array<SparsityRow, 3> kSparsityPercent{{
    {"none", {51.2, 47.8, 50.3, 50.6, 49.9}},
    {"l1", {67.7, 51.8, 57.7, 60.7, 61.2}},
    {"tl1", {82.3, 58.9, 71.9, 64.2, 71.1}},
}};

}  // namespace gsrnn::reference
