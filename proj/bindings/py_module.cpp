// Python bindings for the main operations: codec, thermometer encoders,
// compile / run / check on container files, quantizer and analysis passes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cutie/activity.hpp"
#include "cutie/golden.hpp"
#include "cutie/netgen.hpp"
#include "cutie/quantizer.hpp"
#include "cutie/simulator.hpp"

namespace py = pybind11;
using namespace cutie;

namespace {

QuantStrategy strategy_from_name(const std::string& name) {
  if (name == "magnitude") return QuantStrategy::Magnitude;
  if (name == "magnitude_inverse") return QuantStrategy::MagnitudeInverse;
  if (name == "zigzag") return QuantStrategy::ZigZag;
  throw Error("unknown strategy '" + name + "'");
}

ArchConfig arch_from_kwargs(uint32_t ni, uint32_t no, uint32_t k, uint32_t iw,
                            uint32_t ih, uint32_t l, uint32_t p, uint32_t ws) {
  ArchConfig a;
  a.n_i = ni;
  a.n_o = no;
  a.k = k;
  a.i_w = iw;
  a.i_h = ih;
  a.l = l;
  a.p = p;
  a.w_s = ws;
  return a;
}

}  // namespace

PYBIND11_MODULE(cutie_sim, m) {
  m.doc() = "Ternary CNN accelerator simulator, compiler and analysis models";

  py::register_exception<Error>(m, "CutieError");

  // --- trit codec and encoders ---------------------------------------------
  m.def(
      "pack5",
      [](const std::vector<int>& trits) {
        if (trits.size() != 5) throw Error("pack5 expects 5 trits");
        std::array<Trit, 5> q;
        for (int i = 0; i < 5; ++i) q[i] = Trit(trits[i]);
        return static_cast<int>(pack5(q));
      },
      py::arg("trits"), "Pack five trits into one base-3 coded byte.");
  m.def(
      "unpack5",
      [](int byte) {
        if (byte < 0 || byte > 255) throw Error("byte out of range");
        const auto q = unpack5(static_cast<uint8_t>(byte));
        std::vector<int> out(5);
        for (int i = 0; i < 5; ++i) out[i] = q[i].value();
        return out;
      },
      py::arg("byte"));
  m.def(
      "binary_thermometer",
      [](int64_t x, int64_t levels) {
        const auto v = binary_thermometer(x, levels);
        return std::vector<int>(v.begin(), v.end());
      },
      py::arg("x"), py::arg("levels"));
  m.def(
      "ternary_thermometer",
      [](int64_t x, int64_t levels) {
        const auto v = ternary_thermometer(x, levels);
        return std::vector<int>(v.begin(), v.end());
      },
      py::arg("x"), py::arg("levels"));

  // --- compile / run on container files -------------------------------------
  m.def(
      "compile_network",
      [](const std::string& manifest, const std::string& program, uint32_t ni,
         uint32_t no, uint32_t k, uint32_t iw, uint32_t ih, uint32_t l,
         uint32_t p, uint32_t ws) {
        const ArchConfig arch = arch_from_kwargs(ni, no, k, iw, ih, l, p, ws);
        const NetworkDesc net = load_network(manifest);
        const CompiledProgram prog = emit_program(net, arch);
        save_program(program, prog);
        return prog.instrs.size();
      },
      py::arg("manifest"), py::arg("program"), py::arg("ni") = 128,
      py::arg("no") = 128, py::arg("k") = 3, py::arg("iw") = 32,
      py::arg("ih") = 32, py::arg("l") = 8, py::arg("p") = 4,
      py::arg("ws") = 4,
      "Lower a .ctnet manifest to a .ctprog file; returns the fused layer "
      "count.");
  m.def(
      "run_program",
      [](const std::string& program, const std::string& input,
         const std::string& output, const std::string& trace,
         bool reference) {
        const CompiledProgram prog = load_program(program);
        const PackedTritTensor in = load_trit_tensor(input);
        py::dict res;
        if (reference) {
          const PackedTritTensor out = golden::ref_run(prog, in);
          if (!output.empty()) save_tensor(output, out);
          res["dims"] = out.dims();
          res["trits"] = out.unpack();
          return res;
        }
        const RunResult rr = run_program(prog, in, prog.arch);
        if (!output.empty()) save_tensor(output, rr.output);
        if (!trace.empty()) save_trace(trace, rr.trace);
        res["dims"] = rr.output.dims();
        res["trits"] = rr.output.unpack();
        res["cycles"] = rr.trace.total_cycles;
        return res;
      },
      py::arg("program"), py::arg("input"), py::arg("output") = "",
      py::arg("trace") = "", py::arg("reference") = false);
  m.def(
      "check_program",
      [](const std::string& program, const std::string& input) {
        const CompiledProgram prog = load_program(program);
        const PackedTritTensor in = load_trit_tensor(input);
        const RunResult rr = run_program(prog, in, prog.arch);
        return rr.output == golden::ref_run(prog, in);
      },
      py::arg("program"), py::arg("input"),
      "Run simulator and golden model; true when trit-exact.");

  // --- quantizer -------------------------------------------------------------
  m.def(
      "order_weights",
      [](const std::vector<double>& w, const std::string& strategy) {
        return order_weights(w, strategy_from_name(strategy));
      },
      py::arg("weights"), py::arg("strategy"));
  m.def(
      "project_ternary",
      [](const std::vector<double>& w, double delta) {
        RealTensor t;
        t.dims = {static_cast<uint32_t>(w.size())};
        t.values = w;
        const auto packed = project_ternary(t, delta);
        const auto v = packed.unpack();
        return std::vector<int>(v.begin(), v.end());
      },
      py::arg("weights"), py::arg("delta") = 0.33);
  m.def(
      "sparsity",
      [](const std::vector<int>& trits) {
        std::vector<int8_t> v(trits.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int8_t>(trits[i]);
        return sparsity(PackedTritTensor::from_values(
            {static_cast<uint32_t>(v.size())}, v));
      },
      py::arg("trits"));

  // --- analysis ----------------------------------------------------------------
  m.def(
      "hamming_stats",
      [](const std::vector<int>& pixels, uint32_t channels) {
        std::vector<int8_t> v(pixels.size());
        for (size_t i = 0; i < v.size(); ++i)
          v[i] = static_cast<int8_t>(pixels[i]);
        return hamming_stats(v, channels);
      },
      py::arg("pixels"), py::arg("channels"));
  m.def(
      "count_toggles",
      [](const std::string& trace_path, const std::string& mode,
         uint32_t factor) {
        const SimTrace trace = load_trace(trace_path);
        const ToggleStats s = count_toggles(
            trace,
            mode == "iterative" ? ToggleMode::Iterative : ToggleMode::Unrolled,
            factor);
        py::dict d;
        d["adder_toggle_prob"] = s.adder_input_toggle_prob;
        d["multiplier_toggle_prob"] = s.multiplier_toggle_prob;
        d["adder_toggles"] = s.adder_toggles;
        d["multiplier_toggles"] = s.multiplier_toggles;
        return d;
      },
      py::arg("trace"), py::arg("mode") = "unrolled", py::arg("factor") = 2);
  m.def(
      "energy_estimate",
      [](const std::string& trace_path, const std::string& cost_path,
         bool discount) {
        const SimTrace trace = load_trace(trace_path);
        const CostModel cost =
            cost_path.empty() ? CostModel{} : CostModel::load(cost_path);
        EnergyReport rep = energy_estimate(trace, cost);
        if (discount) rep = binary_discount(rep);
        py::dict d;
        d["compute_mult_pj"] = rep.totals.compute_mult;
        d["compute_popcount_pj"] = rep.totals.compute_popcount;
        d["fm_mem_pj"] = rep.totals.fm_mem;
        d["weight_mem_pj"] = rep.totals.weight_mem;
        d["io_pj"] = rep.totals.io;
        d["codec_pj"] = rep.totals.codec;
        d["static_pj"] = rep.totals.static_;
        d["total_pj"] = rep.totals.total();
        return d;
      },
      py::arg("trace"), py::arg("cost") = "", py::arg("discount") = false);
  m.def(
      "tiling_transfer",
      [](uint32_t fm_h, uint32_t fm_w, uint32_t channels, uint32_t layers,
         uint32_t kernel, const std::string& strategy, uint32_t tile_h,
         uint32_t tile_w, const std::string& cost_path) {
        TilingPlan plan;
        plan.fm_h = fm_h;
        plan.fm_w = fm_w;
        plan.channels = channels;
        plan.layers = layers;
        plan.kernel = kernel;
        plan.strategy = strategy == "layer_first" ? TilingStrategy::LayerFirst
                                                  : TilingStrategy::DepthFirst;
        plan.tile_h = tile_h;
        plan.tile_w = tile_w;
        const CostModel cost =
            cost_path.empty() ? CostModel{} : CostModel::load(cost_path);
        const TilingResult r = tiling_transfer(plan, ArchConfig{}, cost);
        py::dict d;
        d["tiles"] = r.tiles;
        d["bits_external"] = r.bits_external;
        d["bits_weights"] = r.bits_weights;
        d["ops"] = r.ops;
        d["e_feature_pj"] = r.e_feature_pj;
        d["e_weight_pj"] = r.e_weight_pj;
        d["e_compute_pj"] = r.e_compute_pj;
        d["total_pj"] = r.total_pj();
        return d;
      },
      py::arg("fm_h"), py::arg("fm_w"), py::arg("channels") = 128,
      py::arg("layers") = 8, py::arg("kernel") = 3,
      py::arg("strategy") = "depth_first", py::arg("tile_h") = 0,
      py::arg("tile_w") = 0, py::arg("cost") = "");

  // --- generators ---------------------------------------------------------------
  m.def(
      "gen_benchmark",
      [](const std::string& stem, uint64_t seed, double sparsity,
         bool binary) {
        BenchmarkOptions opts;
        opts.seed = seed;
        opts.weight_sparsity = sparsity;
        opts.binary = binary;
        const NetworkDesc net = make_benchmark_network(opts);
        save_network(stem + ".ctnet", net);
        Rng rng(seed ^ 0x9e37u);
        save_tensor(stem + "_input.cttensor",
                    make_random_input(rng, net.input_dims.h, net.input_dims.w,
                                      net.input_dims.c, binary ? 0.0 : 0.66));
        return stem + ".ctnet";
      },
      py::arg("stem"), py::arg("seed") = 1, py::arg("sparsity") = 0.607,
      py::arg("binary") = false);
}
