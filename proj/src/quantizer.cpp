#include "cutie/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cutie {

void QuantSchedule::check() const {
  if (fractions.empty()) throw Error("empty quantization schedule");
  double prev = 0.0;
  for (const double f : fractions) {
    if (f <= prev || f > 1.0)
      throw Error("schedule fractions must be strictly increasing in (0, 1]");
    prev = f;
  }
  if (fractions.back() != 1.0)
    throw Error("schedule must finish at fraction 1.0");
}

std::vector<size_t> order_weights(std::span<const double> w,
                                  QuantStrategy strategy) {
  std::vector<size_t> ascending(w.size());
  std::iota(ascending.begin(), ascending.end(), size_t{0});
  std::stable_sort(ascending.begin(), ascending.end(),
                   [&](size_t a, size_t b) {
                     return std::fabs(w[a]) < std::fabs(w[b]);
                   });
  switch (strategy) {
    case QuantStrategy::MagnitudeInverse:
      return ascending;
    case QuantStrategy::Magnitude: {
      // Descending magnitude with ties still in ascending-index order.
      std::vector<size_t> out(w.size());
      std::iota(out.begin(), out.end(), size_t{0});
      std::stable_sort(out.begin(), out.end(), [&](size_t a, size_t b) {
        return std::fabs(w[a]) > std::fabs(w[b]);
      });
      return out;
    }
    case QuantStrategy::ZigZag: {
      std::vector<size_t> out;
      out.reserve(w.size());
      size_t lo = 0;
      size_t hi = ascending.size();
      while (lo < hi) {
        out.push_back(ascending[lo++]);
        if (lo < hi) out.push_back(ascending[--hi]);
      }
      return out;
    }
  }
  throw Error("unknown quantization strategy");
}

std::vector<std::vector<size_t>> partition_steps(
    std::span<const double> w, QuantStrategy strategy,
    const QuantSchedule& schedule) {
  schedule.check();
  const std::vector<size_t> order = order_weights(w, strategy);
  std::vector<std::vector<size_t>> steps;
  size_t done = 0;
  for (const double f : schedule.fractions) {
    const size_t target = static_cast<size_t>(
        std::ceil(f * static_cast<double>(order.size())));
    const size_t upto = std::min(std::max(target, done), order.size());
    steps.emplace_back(order.begin() + static_cast<long>(done),
                       order.begin() + static_cast<long>(upto));
    done = upto;
  }
  return steps;
}

namespace {

int8_t project_one(double v, double threshold) {
  if (std::fabs(v) >= threshold && v != 0.0)
    return v > 0.0 ? int8_t{1} : int8_t{-1};
  return 0;
}

}  // namespace

PackedTritTensor project_ternary(const RealTensor& w, double delta) {
  if (delta <= 0.0) throw Error("projection delta must be positive");
  double maxabs = 0.0;
  for (const double v : w.values) maxabs = std::max(maxabs, std::fabs(v));
  const double threshold = delta * maxabs;
  std::vector<int8_t> trits(w.values.size());
  for (size_t i = 0; i < trits.size(); ++i)
    trits[i] = project_one(w.values[i], threshold);
  return PackedTritTensor::from_values(w.dims, trits);
}

double sparsity(const PackedTritTensor& t) {
  if (t.count() == 0) throw UndefinedStat("sparsity of an empty tensor");
  const auto v = t.unpack();
  const uint64_t zeros = static_cast<uint64_t>(
      std::count(v.begin(), v.end(), int8_t{0}));
  return static_cast<double>(zeros) / static_cast<double>(t.count());
}

InqResult run_inq(const RealTensor& w, QuantStrategy strategy,
                  const QuantSchedule& schedule, double delta,
                  const RefineHook& hook) {
  const auto steps = partition_steps(w.values, strategy, schedule);

  // The projection threshold freezes at the start so the rule stays
  // scale-invariant across refinement steps.
  double maxabs = 0.0;
  for (const double v : w.values) maxabs = std::max(maxabs, std::fabs(v));
  const double threshold = delta * maxabs;

  std::vector<double> working = w.values;
  std::vector<uint8_t> quantized(w.values.size(), 0);
  InqResult result;
  uint64_t done = 0, zeros = 0;
  for (size_t s = 0; s < steps.size(); ++s) {
    for (const size_t idx : steps[s]) {
      const int8_t t = project_one(working[idx], threshold);
      working[idx] = t;
      quantized[idx] = 1;
      ++done;
      if (t == 0) ++zeros;
    }
    if (hook && s + 1 < steps.size()) hook(working, quantized);
    StepReport r;
    r.step = s;
    r.fraction = schedule.fractions[s];
    r.quantized = done;
    r.zeros = zeros;
    r.subset_sparsity =
        done ? static_cast<double>(zeros) / static_cast<double>(done) : 0.0;
    result.steps.push_back(r);
  }

  std::vector<int8_t> trits(working.size());
  for (size_t i = 0; i < trits.size(); ++i)
    trits[i] = static_cast<int8_t>(working[i]);
  result.trits = PackedTritTensor::from_values(w.dims, trits);
  return result;
}

}  // namespace cutie
