#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cutie/tensor.hpp"

namespace cutie {

enum class QuantStrategy { Magnitude, MagnitudeInverse, ZigZag };

// Cumulative quantized fractions; strictly increasing, last element 1.0.
struct QuantSchedule {
  std::vector<double> fractions;

  void check() const;
  // Decaying step sizes: 20% steps, then 10%, finishing with 5%.
  static QuantSchedule default_schedule() {
    return {{0.2, 0.4, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0}};
  }
};

// Quantization order over flat weight indices. Ties break by ascending
// flat index.
//   Magnitude:        descending |w|
//   MagnitudeInverse: ascending |w|
//   ZigZag:           alternating smallest / largest of the remaining values
std::vector<size_t> order_weights(std::span<const double> w,
                                  QuantStrategy strategy);

// Step k quantizes the first ceil(fractions[k] * N) indices of the order
// that are not quantized yet. The returned sets are disjoint and exhaust
// every index.
std::vector<std::vector<size_t>> partition_steps(std::span<const double> w,
                                                 QuantStrategy strategy,
                                                 const QuantSchedule& schedule);

// Ternary projection: trit = sgn(w) if |w| >= delta * max|w| else 0.
PackedTritTensor project_ternary(const RealTensor& w, double delta);

// Fraction of zero trits. Empty tensors raise UndefinedStat.
double sparsity(const PackedTritTensor& t);

// Optional refinement between quantization steps (stands in for retraining;
// identity by default). Receives the working weights and a 0/1 mask of
// already-quantized positions, which it must leave untouched.
using RefineHook =
    std::function<void(std::vector<double>&, const std::vector<uint8_t>&)>;

struct StepReport {
  size_t step = 0;
  double fraction = 0.0;
  uint64_t quantized = 0;      // cumulative quantized count
  uint64_t zeros = 0;          // zeros among quantized positions
  double subset_sparsity = 0;  // zeros / quantized
};

struct InqResult {
  PackedTritTensor trits;
  std::vector<StepReport> steps;
};

// Stepwise quantization: partition per the schedule, project each step's
// subset, run the refinement hook on the rest.
InqResult run_inq(const RealTensor& w, QuantStrategy strategy,
                  const QuantSchedule& schedule, double delta,
                  const RefineHook& hook = nullptr);

}  // namespace cutie
