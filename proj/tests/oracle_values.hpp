#pragma once

// Reference values produced by tests/oracles/compute_oracles.py (numpy/scipy,
// no shared code with the library). Regenerate with that script if a formula
// is deliberately changed.

namespace oracle {

inline constexpr double kHubFactor = 1.3643348936677;            // ln(100/0.018)/ln(10/0.018)
inline constexpr double kWindP10 = 0.4483870967741935;           // (1000-27)/(2197-27)
inline constexpr double kPv800At45 = 0.7552;                     // 0.8 * (1 - 0.0028*20)
inline constexpr double kKlMu0VarE = 0.35914091422952255;        // 0.5 (e - 1 - 1)
inline constexpr double kMkP1to5 = 0.02748633611151033;          // S=10, var=50/3
inline constexpr double kMkVar1to5 = 16.666666666666668;
inline constexpr double kMkZ1to5 = 2.2045407685048604;
inline constexpr double kMkTiesS = 22.0;                         // y = 1,2,2,3,3,3,5,4
inline constexpr double kMkTiesVar = 60.666666666666664;
inline constexpr double kMkTiesP = 0.007014583882081626;
inline constexpr double kToyWindHourly = 0.22419354838709676;    // mean of p(0), p(10)
inline constexpr double kToyWindDaily = 0.04516129032258064;     // p(5)
inline constexpr double kToyWindBiasPct = -79.85611510791367;
inline constexpr double kToyPvHourly = 0.486;
inline constexpr double kToyPvDaily = 0.5;
inline constexpr double kToyPvBiasPct = 2.880658436213994;
inline constexpr int kMkSizeLow = 16;                            // binomial(500, 0.05) 95% interval
inline constexpr int kMkSizeHigh = 35;
inline constexpr double kAlphaBarDefault = 0.005618761019373728;  // prod(1 - linspace(1e-4, 0.1, 100))

}  // namespace oracle
