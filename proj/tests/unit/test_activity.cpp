#include <cmath>
#include <filesystem>

#include "cutie/activity.hpp"
#include "cutie/netgen.hpp"
#include "cutie/rng.hpp"
#include "doctest.h"
#include "support/stream_gen.hpp"

using namespace cutie;
namespace ts = cutie::testsupport;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.n_i = a.n_o = 8;
  a.k = 3;
  a.i_w = a.i_h = 16;
  a.p = 2;
  a.w_s = 2;
  return a;
}

}  // namespace

TEST_CASE("constant feature stream produces zero adder toggles") {
  const ArchConfig arch = tiny_arch();
  Rng rng(1);
  std::vector<int8_t> image(10 * 10 * arch.n_i, 1);  // constant map
  const auto kernels =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), 0.4);
  const SimTrace trace =
      ts::synth_trace(arch, 10, 10, image, kernels, arch.n_o);
  const ToggleStats stats = count_toggles(trace, ToggleMode::Unrolled);
  CHECK(stats.adder_toggles == 0);
  CHECK(stats.multiplier_toggles == 0);
}

TEST_CASE("all-zero weights produce zero adder toggle probability") {
  const ArchConfig arch = tiny_arch();
  Rng rng(2);
  const auto image = ts::markov_image(rng, 10, 10, arch.n_i, 0.4, 0.5);
  std::vector<int8_t> kernels(arch.n_o * arch.kernel_slot_trits(), 0);
  const SimTrace trace =
      ts::synth_trace(arch, 10, 10, image, std::move(kernels), arch.n_o);
  const ToggleStats stats = count_toggles(trace, ToggleMode::Unrolled);
  CHECK(stats.adder_input_toggle_prob == 0.0);
  CHECK(stats.adder_toggles == 0);
  // Activation inputs still toggle.
  CHECK(stats.multiplier_toggles > 0);
}

TEST_CASE("iterative decomposition toggles at least as much as unrolled") {
  const ArchConfig arch = tiny_arch();
  Rng rng(3);
  const auto image = ts::markov_image(rng, 12, 12, arch.n_i, 0.5, 0.4);
  const auto kernels =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), 0.5);
  const SimTrace trace =
      ts::synth_trace(arch, 12, 12, image, kernels, arch.n_o);
  const ToggleStats un = count_toggles(trace, ToggleMode::Unrolled);
  const ToggleStats it = count_toggles(trace, ToggleMode::Iterative, 2);
  CHECK(it.adder_toggles >= un.adder_toggles);
}

TEST_CASE("count_toggles rejects empty traces and bad factors") {
  SimTrace empty;
  empty.arch = tiny_arch();
  CHECK_THROWS_AS(count_toggles(empty, ToggleMode::Unrolled), EmptyTrace);

  const ArchConfig arch = tiny_arch();
  Rng rng(4);
  const auto image = ts::markov_image(rng, 6, 6, arch.n_i, 0.4, 0.5);
  const auto kernels =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), 0.4);
  const SimTrace trace = ts::synth_trace(arch, 6, 6, image, kernels, arch.n_o);
  CHECK_THROWS_AS(count_toggles(trace, ToggleMode::Iterative, 3), Error);
}

TEST_CASE("adder toggles scale with weight density within 5 percent") {
  const ArchConfig arch = tiny_arch();
  // Independent random windows: every pixel redrawn each step.
  Rng rng(5);
  const auto image = ts::markov_image(rng, 34, 34, arch.n_i, 0.3, 1.0);
  const double s1 = 0.3, s2 = 0.6;
  const auto k1 =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), s1);
  const auto k2 =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), s2);
  const SimTrace t1 = ts::synth_trace(arch, 34, 34, image, k1, arch.n_o);
  const SimTrace t2 = ts::synth_trace(arch, 34, 34, image, k2, arch.n_o);
  const double c1 =
      static_cast<double>(count_toggles(t1, ToggleMode::Unrolled).adder_toggles);
  const double c2 =
      static_cast<double>(count_toggles(t2, ToggleMode::Unrolled).adder_toggles);
  // Expected toggles scale with (1 - sparsity); compare against the actual
  // nonzero-weight counts to avoid sampling noise from the kernel draw.
  uint64_t n1 = 0, n2 = 0;
  for (const auto v : k1) n1 += v != 0;
  for (const auto v : k2) n2 += v != 0;
  const double expected = static_cast<double>(n1) / static_cast<double>(n2);
  CHECK(c1 / c2 == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("hamming_stats basics") {
  // Identical consecutive pixels.
  std::vector<int8_t> same = {1, 0, -1, 1, 0, -1};
  CHECK(hamming_stats(same, 3) == 0.0);

  // Complementary binary pixels flip one code bit per channel (01 vs 11).
  std::vector<int8_t> comp(2 * 128);
  for (int c = 0; c < 128; ++c) {
    comp[c] = 1;
    comp[128 + c] = -1;
  }
  CHECK(hamming_stats(comp, 128) == 128.0);

  // Zero to +1 flips one bit, zero to -1 flips two.
  std::vector<int8_t> z2p = {0, 1};
  CHECK(hamming_stats(z2p, 1) == 1.0);
  std::vector<int8_t> z2m = {0, -1};
  CHECK(hamming_stats(z2m, 1) == 2.0);

  std::vector<int8_t> single(128, 0);
  CHECK_THROWS_AS(hamming_stats(single, 128), UndefinedStat);
}

TEST_CASE("calibrated streams land on the reference Hamming distances") {
  Rng rng(6);
  const auto cal_t = ts::ternary_calibration();
  const auto tern =
      ts::markov_image(rng, 64, 64, 128, cal_t.zero_frac, cal_t.redraw);
  const double ham_t = hamming_stats(tern, 128);
  CHECK(ham_t > 31.0);
  CHECK(ham_t < 35.0);

  const auto cal_b = ts::binary_calibration();
  const auto bin =
      ts::markov_image(rng, 64, 64, 128, cal_b.zero_frac, cal_b.redraw);
  const double ham_b = hamming_stats(bin, 128);
  CHECK(ham_b > 42.0);
  CHECK(ham_b < 46.0);
}

TEST_CASE("energy estimate: itemization and linearity") {
  const ArchConfig arch = tiny_arch();
  Rng rng(7);
  const auto image = ts::markov_image(rng, 8, 8, arch.n_i, 0.4, 0.4);
  const auto kernels =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), 0.5);
  SimTrace trace = ts::synth_trace(arch, 8, 8, image, kernels, arch.n_o);
  trace.layers[0].fm_write_trits = 100;
  trace.layers[0].weight_load_trits = 500;

  CostModel cost;
  const EnergyReport rep = energy_estimate(trace, cost);
  const EnergyItems& t = rep.totals;
  const double item_sum = t.compute_mult + t.compute_popcount + t.fm_mem +
                          t.weight_mem + t.io + t.codec + t.static_;
  CHECK(t.total() == doctest::Approx(item_sum).epsilon(1e-12));
  CHECK(t.compute_popcount > 0.0);
  CHECK(t.io > 0.0);

  CostModel doubled = cost;
  doubled.dram_pj_per_bit *= 2.0;
  const EnergyReport rep2 = energy_estimate(trace, doubled);
  CHECK(rep2.totals.io == doctest::Approx(2.0 * t.io));
  CHECK(rep2.totals.fm_mem == doctest::Approx(t.fm_mem));
  CHECK(rep2.totals.compute_popcount == doctest::Approx(t.compute_popcount));
}

TEST_CASE("energy estimate: zero-toggle trace has zero compute energy") {
  const ArchConfig arch = tiny_arch();
  Rng rng(8);
  std::vector<int8_t> image(8 * 8 * arch.n_i, -1);
  const auto kernels =
      ts::sparse_kernels(rng, arch.n_o, arch.kernel_slot_trits(), 0.4);
  const SimTrace trace = ts::synth_trace(arch, 8, 8, image, kernels, arch.n_o);
  const EnergyReport rep = energy_estimate(trace, CostModel{});
  CHECK(rep.totals.compute_popcount == 0.0);
  CHECK(rep.totals.compute_mult == 0.0);
}

TEST_CASE("binary discount adjusts exactly the documented items") {
  EnergyReport rep;
  EnergyItems e;
  e.compute_mult = 10.0;
  e.compute_popcount = 40.0;
  e.fm_mem = 16.0;
  e.weight_mem = 8.0;
  e.io = 3.2;
  e.codec = 5.0;
  e.static_ = 2.0;
  rep.per_layer = {e};
  rep.totals = e;
  const EnergyReport d = binary_discount(rep);
  CHECK(d.totals.compute_mult == 10.0);
  CHECK(d.totals.compute_popcount == 20.0);
  CHECK(d.totals.fm_mem == doctest::Approx(10.0));
  CHECK(d.totals.weight_mem == doctest::Approx(5.0));
  CHECK(d.totals.io == 3.2);  // off-chip transfers are not discounted
  CHECK(d.totals.codec == 0.0);
  CHECK(d.totals.static_ == 2.0);

  // Zero memory and codec items: only the popcount share halves.
  EnergyReport compute_only;
  EnergyItems c;
  c.compute_mult = 7.0;
  c.compute_popcount = 9.0;
  compute_only.per_layer = {c};
  compute_only.totals = c;
  const EnergyReport dc = binary_discount(compute_only);
  CHECK(dc.totals.compute_mult == 7.0);
  CHECK(dc.totals.compute_popcount == 4.5);
  CHECK(dc.totals.total() == doctest::Approx(11.5));

  // Identity when every discountable item is zero.
  EnergyReport none;
  EnergyItems n;
  n.compute_mult = 3.0;
  n.static_ = 1.0;
  none.per_layer = {n};
  none.totals = n;
  const EnergyReport dn = binary_discount(none);
  CHECK(dn.totals.total() == doctest::Approx(none.totals.total()));
}

TEST_CASE("tiling: 32x32 anchor") {
  TilingPlan plan;  // defaults: 32x32, 128 channels, 8 layers, K=3
  CostModel cost;   // 20 pJ/bit DRAM
  plan.strategy = TilingStrategy::DepthFirst;
  const TilingResult depth = tiling_transfer(plan, ArchConfig{}, cost);
  CHECK(depth.bits_external == doctest::Approx(209715.2));
  // 209,715 bits x 20 pJ/bit = 4.19 uJ, within 2% of the 4.2 uJ reference.
  CHECK(depth.e_feature_pj == doctest::Approx(4.19430e6).epsilon(1e-4));
  CHECK(std::fabs(depth.e_feature_pj - 4.2e6) / 4.2e6 < 0.02);

  plan.strategy = TilingStrategy::LayerFirst;
  const TilingResult layer = tiling_transfer(plan, ArchConfig{}, cost);
  CHECK(layer.bits_external == depth.bits_external);
  CHECK(layer.total_pj() == depth.total_pj());
}

TEST_CASE("tiling: depth-first beats layer-first on large frames") {
  CostModel cost;
  for (const uint32_t dim : {64u, 96u}) {
    TilingPlan plan;
    plan.fm_h = plan.fm_w = dim;
    plan.layers = 8;
    plan.strategy = TilingStrategy::DepthFirst;
    const TilingResult depth = tiling_transfer(plan, ArchConfig{}, cost);
    plan.strategy = TilingStrategy::LayerFirst;
    const TilingResult layer = tiling_transfer(plan, ArchConfig{}, cost);
    CHECK(depth.bits_external < layer.bits_external);
    CHECK(depth.total_pj() < layer.total_pj());
    // Depth-first reloads weights per tile.
    CHECK(depth.bits_weights > layer.bits_weights);
    // Depth-first recomputes halo regions.
    CHECK(depth.ops > layer.ops);
  }
}

TEST_CASE("tiling: single layer makes the strategies coincide") {
  CostModel cost;
  TilingPlan plan;
  plan.fm_h = plan.fm_w = 64;
  plan.layers = 1;
  plan.strategy = TilingStrategy::DepthFirst;
  const TilingResult depth = tiling_transfer(plan, ArchConfig{}, cost);
  plan.strategy = TilingStrategy::LayerFirst;
  const TilingResult layer = tiling_transfer(plan, ArchConfig{}, cost);
  CHECK(depth.bits_external == doctest::Approx(layer.bits_external));
  CHECK(depth.bits_weights == doctest::Approx(layer.bits_weights));
}

TEST_CASE("tiling: oversized tiles are rejected") {
  TilingPlan plan;
  plan.fm_h = plan.fm_w = 64;
  plan.tile_h = plan.tile_w = 48;  // exceeds the 32x32 memory
  CHECK_THROWS_AS(tiling_transfer(plan, ArchConfig{}, CostModel{}),
                  CapacityError);
}

TEST_CASE("cost model file roundtrip") {
  namespace fs = std::filesystem;
  CostModel m;
  m.dram_pj_per_bit = 17.5;
  m.compute_pj_per_toggled_node = 0.123;
  const auto path = fs::temp_directory_path() / "cost.cfg";
  m.save(path);
  const CostModel loaded = CostModel::load(path);
  CHECK(loaded.dram_pj_per_bit == doctest::Approx(17.5));
  CHECK(loaded.compute_pj_per_toggled_node == doctest::Approx(0.123));
  fs::remove(path);
}
