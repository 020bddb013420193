// Command-line front end: compile networks, run the simulator or the golden
// model, encode inputs, quantize weights, and emit activity / energy /
// tiling reports.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cutie/activity.hpp"
#include "cutie/golden.hpp"
#include "cutie/netgen.hpp"
#include "cutie/quantizer.hpp"
#include "cutie/simulator.hpp"

namespace {

using namespace cutie;

constexpr int kExitUsage = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitCapacity = 4;

struct ArchFlags {
  ArchConfig arch;
  std::string config_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value config file");
    cmd->add_option("--ni", arch.n_i, "max input channels");
    cmd->add_option("--no", arch.n_o, "max output channels");
    cmd->add_option("-k,--kernel-max", arch.k, "max kernel size");
    cmd->add_option("--iw", arch.i_w, "max feature map width");
    cmd->add_option("--ih", arch.i_h, "max feature map height");
    cmd->add_option("-L,--max-layers", arch.l, "layer queue depth");
    cmd->add_option("-P,--stages", arch.p, "pipeline stages");
    cmd->add_option("--ws", arch.w_s, "memory words per pixel");
  }

  // Precedence: flags > config file > built-in defaults.
  ArchConfig resolve(const CLI::App* cmd) const {
    ArchConfig a = arch;
    if (config_file.empty()) return a;
    std::ifstream is(config_file);
    if (!is) throw FormatError("cannot open config " + config_file);
    std::string line;
    while (std::getline(is, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string key, eq;
      uint32_t value;
      if (!(ls >> key)) continue;
      if (!(ls >> eq >> value) || eq != "=")
        throw FormatError("bad config line: " + line);
      const auto set = [&](const char* flag, uint32_t& dst) {
        if (cmd->count(flag) == 0) dst = value;
      };
      if (key == "ni") set("--ni", a.n_i);
      else if (key == "no") set("--no", a.n_o);
      else if (key == "k") set("--kernel-max", a.k);
      else if (key == "iw") set("--iw", a.i_w);
      else if (key == "ih") set("--ih", a.i_h);
      else if (key == "l") set("--max-layers", a.l);
      else if (key == "p") set("--stages", a.p);
      else if (key == "ws") set("--ws", a.w_s);
      else throw FormatError("unknown config key '" + key + "'");
    }
    return a;
  }
};

CostModel resolve_cost(const std::string& flag_path) {
  if (!flag_path.empty()) return CostModel::load(flag_path);
  if (const char* env = std::getenv("CUTIE_COST_MODEL"))
    return CostModel::load(env);
  return CostModel{};
}

std::ostream& open_report(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw FormatError("cannot open " + path + " for writing");
  return file;
}

std::pair<uint32_t, uint32_t> parse_dims(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos)
    throw FormatError("expected HxW, got '" + s + "'");
  return {static_cast<uint32_t>(std::stoul(s.substr(0, x))),
          static_cast<uint32_t>(std::stoul(s.substr(x + 1)))};
}

// --- compile -----------------------------------------------------------------

int cmd_compile(const std::string& net_path, const std::string& out_path,
                const ArchConfig& arch, const std::string& dump_thresholds) {
  const NetworkDesc net = load_network(net_path);
  const auto violations = validate(net, arch);
  if (!violations.empty()) {
    for (const auto& v : violations)
      std::cerr << "layer " << v.layer << ": " << v.message << "\n";
    return kExitUsage;
  }
  const CompiledProgram prog = emit_program(net, arch);
  save_program(out_path, prog);

  std::cout << "layer,in_h,in_w,in_ch,out_h,out_w,out_ch,kernel,stride,pool,"
               "mop,t_lo_min,t_hi_max\n";
  for (size_t i = 0; i < prog.instrs.size(); ++i) {
    const LayerInstr& li = prog.instrs[i];
    LayerDesc equiv;
    equiv.in_ch = li.in_ch;
    equiv.out_ch = li.out_ch;
    equiv.kh = li.kh;
    equiv.kw = li.kw;
    const uint64_t ops = op_count(equiv, li.conv_out_h(), li.conv_out_w());
    int32_t lo = INT32_MAX, hi = INT32_MIN;
    for (uint32_t c = 0; c < li.out_ch; ++c) {
      lo = std::min(lo, prog.thresholds[li.threshold_base + c].lo);
      hi = std::max(hi, prog.thresholds[li.threshold_base + c].hi);
    }
    const char* pool = li.pool == PoolKind::None
                           ? "none"
                           : (li.pool == PoolKind::Max ? "max" : "avg");
    std::cout << i << "," << li.in_h << "," << li.in_w << "," << li.in_ch
              << "," << li.out_h() << "," << li.out_w() << "," << li.out_ch
              << "," << li.kh << "x" << li.kw << "," << li.sh << "x" << li.sw
              << "," << pool << "," << std::fixed << std::setprecision(1)
              << static_cast<double>(ops) / 1e6 << "," << lo << "," << hi
              << "\n";
    std::cout.unsetf(std::ios::fixed);
  }

  if (!dump_thresholds.empty()) {
    std::ofstream os(dump_thresholds);
    if (!os) throw FormatError("cannot open " + dump_thresholds);
    os << "layer,channel,t_lo,t_hi\n";
    for (size_t i = 0; i < prog.instrs.size(); ++i)
      for (uint32_t c = 0; c < prog.instrs[i].out_ch; ++c) {
        const ThresholdPair& t =
            prog.thresholds[prog.instrs[i].threshold_base + c];
        os << i << "," << c << "," << t.lo << "," << t.hi << "\n";
      }
  }
  return 0;
}

// --- run ---------------------------------------------------------------------

int cmd_run(const std::string& prog_path, const std::string& input_path,
            const std::string& out_path, const std::string& trace_path,
            bool reference, bool check, bool stall,
            const std::string& summary_path) {
  const CompiledProgram prog = load_program(prog_path);
  const PackedTritTensor input = load_trit_tensor(input_path);

  SimOptions opts;
  opts.stall_on_row_advance = stall;

  PackedTritTensor output;
  std::optional<SimTrace> trace;
  if (reference && !check) {
    output = golden::ref_run(prog, input);
  } else {
    RunResult rr = run_program(prog, input, prog.arch, opts);
    output = std::move(rr.output);
    trace = std::move(rr.trace);
  }

  if (check) {
    const PackedTritTensor ref = golden::ref_run(prog, input);
    if (!(ref == output)) {
      const auto a = output.unpack();
      const auto b = ref.unpack();
      size_t first = 0;
      while (first < a.size() && a[first] == b[first]) ++first;
      std::cerr << "MISMATCH at flat index " << first << ": simulator "
                << int(a[first]) << ", reference " << int(b[first]) << "\n";
      return kExitMismatch;
    }
    std::cout << "MATCH\n";
  }

  if (!out_path.empty()) save_tensor(out_path, output);
  if (!trace_path.empty()) {
    if (!trace) throw Error("--trace requires the simulator path");
    save_trace(trace_path, *trace);
  }
  if (!summary_path.empty() && trace) {
    std::ofstream os(summary_path);
    if (!os) throw FormatError("cannot open " + summary_path);
    os << "layer,cycles,ops,ops_per_cycle,utilization\n";
    for (size_t i = 0; i < trace->layers.size(); ++i) {
      const CycleReport r = cycle_report(*trace, i);
      os << i << "," << r.cycles << "," << r.ops << "," << std::setprecision(6)
         << r.ops_per_cycle << "," << r.utilization << "\n";
    }
  }
  return 0;
}

// --- encode --------------------------------------------------------------------

int cmd_encode(const std::string& image_path, const std::string& out_path,
               const std::string& mode, int64_t m) {
  const IntTensor image = load_int_tensor(image_path);
  if (image.dims.size() != 3)
    throw FormatError("encode expects an (H, W, C) int tensor");
  const bool ternary = mode == "ternary";
  if (!ternary && mode != "binary")
    throw FormatError("encoding mode must be binary or ternary");

  const uint32_t h = image.dims[0], w = image.dims[1], c = image.dims[2];
  std::vector<int8_t> out;
  out.reserve(image.values.size() * static_cast<size_t>(m));
  for (const int32_t x : image.values) {
    const std::vector<int8_t> enc =
        ternary ? ternary_thermometer(x, m) : binary_thermometer(x, m);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  save_tensor(out_path,
              PackedTritTensor::from_values(
                  {h, w, c * static_cast<uint32_t>(m)}, out));
  return 0;
}

// --- report --------------------------------------------------------------------

void write_energy_csv(std::ostream& os, const EnergyReport& rep,
                      const char* tag) {
  os << "layer,tag,compute_mult_pj,compute_popcount_pj,fm_mem_pj,"
        "weight_mem_pj,io_pj,codec_pj,static_pj,total_pj\n";
  const auto row = [&](const std::string& name, const EnergyItems& e) {
    os << name << "," << tag << "," << std::setprecision(9) << e.compute_mult
       << "," << e.compute_popcount << "," << e.fm_mem << "," << e.weight_mem
       << "," << e.io << "," << e.codec << "," << e.static_ << ","
       << e.total() << "\n";
  };
  for (size_t i = 0; i < rep.per_layer.size(); ++i)
    row(std::to_string(i), rep.per_layer[i]);
  row("total", rep.totals);
}

int cmd_report(const std::string& trace_path, const std::string& cost_path,
               bool activity, uint32_t iterative, bool energy,
               bool discount, const std::string& out_path) {
  const SimTrace trace = load_trace(trace_path);
  const CostModel cost = resolve_cost(cost_path);
  std::ofstream file;
  std::ostream& os = open_report(file, out_path);

  if (activity) {
    os << "mode,adder_toggle_prob,multiplier_toggle_prob,adder_toggles,"
          "multiplier_toggles\n";
    const ToggleStats un = count_toggles(trace, ToggleMode::Unrolled);
    os << "unrolled," << std::setprecision(9) << un.adder_input_toggle_prob
       << "," << un.multiplier_toggle_prob << "," << un.adder_toggles << ","
       << un.multiplier_toggles << "\n";
    if (iterative > 0) {
      const ToggleStats it =
          count_toggles(trace, ToggleMode::Iterative, iterative);
      os << "iterative_" << iterative << "," << it.adder_input_toggle_prob
         << "," << it.multiplier_toggle_prob << "," << it.adder_toggles << ","
         << it.multiplier_toggles << "\n";
    }
  }
  if (energy) {
    EnergyReport rep = energy_estimate(trace, cost);
    if (discount) {
      write_energy_csv(os, binary_discount(rep), "binary_discount");
    } else {
      write_energy_csv(os, rep, "ternary");
    }
  }
  return 0;
}

// --- tiling --------------------------------------------------------------------

int cmd_tiling(const std::string& fm, uint32_t channels, uint32_t layers,
               uint32_t kernel, const std::string& strategy,
               const std::string& tile, const std::string& cost_path,
               const ArchConfig& arch, const std::string& out_path) {
  const auto [fh, fw] = parse_dims(fm);
  TilingPlan plan;
  plan.fm_h = fh;
  plan.fm_w = fw;
  plan.channels = channels;
  plan.layers = layers;
  plan.kernel = kernel;
  if (!tile.empty()) {
    const auto [th, tw] = parse_dims(tile);
    plan.tile_h = th;
    plan.tile_w = tw;
  }
  const CostModel cost = resolve_cost(cost_path);

  std::vector<TilingStrategy> strategies;
  if (strategy == "layer_first") strategies = {TilingStrategy::LayerFirst};
  else if (strategy == "depth_first") strategies = {TilingStrategy::DepthFirst};
  else if (strategy == "both")
    strategies = {TilingStrategy::DepthFirst, TilingStrategy::LayerFirst};
  else throw FormatError("strategy must be layer_first, depth_first or both");

  std::ofstream file;
  std::ostream& os = open_report(file, out_path);
  os << "strategy,tiles,bits_external,bits_weights,ops,e_feature_pj,"
        "e_weight_pj,e_compute_pj,total_pj\n";
  for (const TilingStrategy s : strategies) {
    plan.strategy = s;
    TilingResult r;
    try {
      r = tiling_transfer(plan, arch, cost);
    } catch (const CapacityError& e) {
      // A bad --tile value is a usage error, not a runtime capacity fault.
      throw Error(e.what());
    }
    os << (s == TilingStrategy::DepthFirst ? "depth_first" : "layer_first")
       << "," << r.tiles << "," << std::setprecision(9) << r.bits_external
       << "," << r.bits_weights << "," << r.ops << "," << r.e_feature_pj
       << "," << r.e_weight_pj << "," << r.e_compute_pj << "," << r.total_pj()
       << "\n";
  }
  return 0;
}

// --- quantize -------------------------------------------------------------------

int cmd_quantize(const std::vector<std::string>& weight_paths,
                 const std::string& strategy_name,
                 const std::string& schedule_csv, double delta,
                 const std::string& out_prefix) {
  QuantStrategy strategy;
  if (strategy_name == "magnitude") strategy = QuantStrategy::Magnitude;
  else if (strategy_name == "magnitude_inverse")
    strategy = QuantStrategy::MagnitudeInverse;
  else if (strategy_name == "zigzag") strategy = QuantStrategy::ZigZag;
  else throw FormatError("unknown strategy '" + strategy_name + "'");

  QuantSchedule schedule = QuantSchedule::default_schedule();
  if (!schedule_csv.empty()) {
    schedule.fractions.clear();
    std::istringstream ss(schedule_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      schedule.fractions.push_back(std::stod(tok));
  }
  schedule.check();

  std::ofstream csv(out_prefix + "_sparsity.csv");
  if (!csv) throw FormatError("cannot open sparsity report");
  csv << "layer,strategy,step,fraction,subset_sparsity\n";
  for (size_t i = 0; i < weight_paths.size(); ++i) {
    const RealTensor w = load_real_tensor(weight_paths[i]);
    const InqResult res = run_inq(w, strategy, schedule, delta);
    save_tensor(out_prefix + "_l" + std::to_string(i) + ".cttensor",
                res.trits);
    for (const StepReport& s : res.steps)
      csv << i << "," << strategy_name << "," << s.step << "," << s.fraction
          << "," << std::setprecision(6) << s.subset_sparsity << "\n";
  }
  return 0;
}

// --- gen ------------------------------------------------------------------------

int cmd_gen(const std::string& preset, uint64_t seed, double sparsity,
            bool binary, const std::string& out_stem) {
  if (preset == "benchmark") {
    BenchmarkOptions opts;
    opts.seed = seed;
    opts.weight_sparsity = sparsity;
    opts.binary = binary;
    const NetworkDesc net = make_benchmark_network(opts);
    save_network(out_stem + ".ctnet", net);
    Rng rng(seed ^ 0x9e37u);
    save_tensor(out_stem + "_input.cttensor",
                make_random_input(rng, net.input_dims.h, net.input_dims.w,
                                  net.input_dims.c, binary ? 0.0 : 0.66));
    std::cout << out_stem << ".ctnet\n";
    return 0;
  }
  if (preset == "tiny") {
    Rng rng(seed);
    const NetworkDesc net = make_random_network(rng);
    save_network(out_stem + ".ctnet", net);
    save_tensor(out_stem + "_input.cttensor",
                make_random_input(rng, net.input_dims.h, net.input_dims.w,
                                  net.input_dims.c, 0.4));
    std::cout << out_stem << ".ctnet\n";
    return 0;
  }
  throw FormatError("preset must be benchmark or tiny");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CUTIE ternary CNN accelerator simulator and compiler"};
  app.require_subcommand(1);

  // compile
  auto* compile = app.add_subcommand("compile", "lower a network manifest");
  std::string net_path, prog_out = "prog.ctprog", dump_thresholds;
  ArchFlags compile_arch;
  compile->add_option("network", net_path, "manifest (.ctnet)")->required();
  compile->add_option("-o,--output", prog_out, "compiled program");
  compile->add_option("--dump-thresholds", dump_thresholds, "threshold CSV");
  compile_arch.attach(compile);

  // run
  auto* run = app.add_subcommand("run", "execute a compiled program");
  std::string run_prog, run_input, run_out, run_trace, run_summary;
  bool run_reference = false, run_check = false, run_stall = false;
  run->add_option("program", run_prog, "program (.ctprog)")->required();
  run->add_option("input", run_input, "input tensor (.cttensor)")->required();
  run->add_option("-o,--output", run_out, "output tensor");
  run->add_option("--trace", run_trace, "cycle trace file");
  run->add_option("--summary", run_summary, "per-layer cycle CSV");
  run->add_flag("--reference", run_reference, "use the golden model");
  run->add_flag("--check", run_check, "run both and compare");
  run->add_flag("--stall", run_stall, "stall window release on row loads");

  // encode
  auto* encode = app.add_subcommand("encode", "thermometer-encode a raw image");
  std::string enc_in, enc_out = "input.cttensor", enc_mode = "ternary";
  int64_t enc_m = 128;
  encode->add_option("image", enc_in, "int32 image tensor")->required();
  encode->add_option("-o,--output", enc_out, "encoded trit tensor");
  encode->add_option("--mode", enc_mode, "binary | ternary");
  encode->add_option("-M,--levels", enc_m, "thermometer size M");

  // report
  auto* report = app.add_subcommand("report", "activity / energy reports");
  std::string rep_trace, rep_cost, rep_out;
  bool rep_activity = false, rep_energy = false, rep_discount = false;
  uint32_t rep_iterative = 0;
  report->add_option("trace", rep_trace, "trace file (.cttrace)")->required();
  report->add_option("--cost", rep_cost, "cost model file");
  report->add_option("-o,--output", rep_out, "CSV output (default stdout)");
  report->add_flag("--activity", rep_activity, "toggle statistics");
  report->add_option("--iterative", rep_iterative,
                     "also emulate an iteratively decomposed datapath");
  report->add_flag("--energy", rep_energy, "itemized energy estimate");
  report->add_flag("--binary-discount", rep_discount,
                   "binary-equivalent adjustment");

  // tiling
  auto* tiling = app.add_subcommand("tiling", "external transfer exploration");
  std::string til_fm = "32x32", til_strategy = "both", til_tile, til_cost,
              til_out;
  uint32_t til_channels = 128, til_layers = 8, til_kernel = 3;
  ArchFlags tiling_arch;
  tiling->add_option("--fm", til_fm, "feature map HxW");
  tiling->add_option("--channels", til_channels, "channels per layer");
  tiling->add_option("--layers", til_layers, "conv layer count");
  tiling->add_option("--kernel", til_kernel, "kernel size");
  tiling->add_option("--strategy", til_strategy,
                     "layer_first | depth_first | both");
  tiling->add_option("--tile", til_tile, "tile HxW (default arch memory)");
  tiling->add_option("--cost", til_cost, "cost model file");
  tiling->add_option("-o,--output", til_out, "CSV output");
  tiling_arch.attach(tiling);

  // quantize
  auto* quantize = app.add_subcommand("quantize", "stepwise ternarization");
  std::vector<std::string> q_weights;
  std::string q_strategy = "magnitude_inverse", q_schedule, q_prefix = "quant";
  double q_delta = 0.33;
  quantize->add_option("weights", q_weights, "real64 weight tensors")
      ->required();
  quantize->add_option("--strategy", q_strategy,
                       "magnitude | magnitude_inverse | zigzag");
  quantize->add_option("--schedule", q_schedule,
                       "cumulative fractions, e.g. 0.2,0.5,1.0");
  quantize->add_option("--delta", q_delta, "projection threshold");
  quantize->add_option("-o,--prefix", q_prefix, "output prefix");

  // gen
  auto* gen = app.add_subcommand("gen", "generate example networks");
  std::string gen_preset = "benchmark", gen_out = "net";
  uint64_t gen_seed = 1;
  double gen_sparsity = 0.607;
  bool gen_binary = false;
  gen->add_option("--preset", gen_preset, "benchmark | tiny");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--sparsity", gen_sparsity, "weight sparsity");
  gen->add_flag("--binary", gen_binary, "binary weights and thresholds");
  gen->add_option("-o,--output", gen_out, "output stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (compile->parsed())
      return cmd_compile(net_path, prog_out, compile_arch.resolve(compile),
                         dump_thresholds);
    if (run->parsed())
      return cmd_run(run_prog, run_input, run_out, run_trace, run_reference,
                     run_check, run_stall, run_summary);
    if (encode->parsed()) return cmd_encode(enc_in, enc_out, enc_mode, enc_m);
    if (report->parsed())
      return cmd_report(rep_trace, rep_cost, rep_activity, rep_iterative,
                        rep_energy, rep_discount, rep_out);
    if (tiling->parsed())
      return cmd_tiling(til_fm, til_channels, til_layers, til_kernel,
                        til_strategy, til_tile, til_cost,
                        tiling_arch.resolve(tiling), til_out);
    if (quantize->parsed())
      return cmd_quantize(q_weights, q_strategy, q_schedule, q_delta,
                          q_prefix);
    if (gen->parsed())
      return cmd_gen(gen_preset, gen_seed, gen_sparsity, gen_binary, gen_out);
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
