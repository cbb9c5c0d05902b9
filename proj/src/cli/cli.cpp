#include "fuselab/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/metrics.hpp"
#include "fuselab/simd/kernels.hpp"
#include "fuselab/softmask.hpp"
#include "fuselab/staple.hpp"
#include "fuselab/svol.hpp"
#include "fuselab/synth.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "output.hpp"

namespace fuselab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct GlobalOpts {
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  bool force = false;
  std::string isa = "auto";
  std::string config;
};

struct SoftmaskOpts {
  double gamma = 0.3;
  double ratio = 1.2;
  std::string threshold_mode = "percentile:10";
  int connectivity = 26;
  int max_dilation_iters = 10;
};

struct FuseOpts {
  std::vector<std::string> inputs;
  std::string output;
  std::string variant = "auto";
  std::string mstep = "expected-count";
  std::string prior = "auto";
  double init_sens = 0.9;
  double init_spec = 0.9;
  int max_iters = 100;
  double tol = 1e-6;
  std::size_t mc_samples = 1000;
  bool binarize = false;
  double threshold = 0.5;
  std::string flair;
  SoftmaskOpts mask;
};

struct SoftmaskCmdOpts {
  std::vector<std::string> inputs;
  std::string flair;
  std::string output;
  SoftmaskOpts mask;
};

struct SimulateOpts {
  std::string sim_config;
  std::string output;
};

struct EvalOpts {
  std::string truth;
  std::string pred;
  double threshold = 0.5;
  bool binarize_truth = false;
  std::string output;
};

void add_softmask_flags(CLI::App* cmd, SoftmaskOpts& o) {
  cmd->add_option("--gamma", o.gamma, "Soft value of accepted ring voxels, in (0,1)")->capture_default_str();
  cmd->add_option("--ratio", o.ratio, "Target dilated volume as a multiple of the lesion volume")
      ->capture_default_str();
  cmd->add_option("--threshold-mode", o.threshold_mode, "percentile:<p> or fixed:<level>")
      ->capture_default_str();
  cmd->add_option("--connectivity", o.connectivity, "6, 18 or 26")->capture_default_str();
  cmd->add_option("--max-dilation-iters", o.max_dilation_iters)->capture_default_str();
}

SoftMaskConfig to_mask_config(const SoftmaskOpts& o) {
  SoftMaskConfig cfg;
  cfg.gamma = o.gamma;
  cfg.target_volume_ratio = o.ratio;
  cfg.connectivity = o.connectivity;
  cfg.max_dilation_iters = o.max_dilation_iters;
  const auto colon = o.threshold_mode.find(':');
  const std::string kind = o.threshold_mode.substr(0, colon);
  std::optional<double> value;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      const std::string rest = o.threshold_mode.substr(colon + 1);
      value = std::stod(rest, &used);
      if (used != rest.size()) value.reset();
    } catch (const std::exception&) {
      value.reset();
    }
    if (!value) throw UsageError("bad --threshold-mode value '" + o.threshold_mode + "'");
  }
  if (kind == "percentile") {
    cfg.threshold = ThresholdMode::percentile(value.value_or(10.0));
  } else if (kind == "fixed" && value) {
    cfg.threshold = ThresholdMode::fixed(*value);
  } else {
    throw UsageError("--threshold-mode must be percentile[:p] or fixed:<level>");
  }
  cfg.validate();
  return cfg;
}

json mask_json(const SoftmaskOpts& o) {
  return {{"gamma", o.gamma},
          {"ratio", o.ratio},
          {"threshold-mode", o.threshold_mode},
          {"connectivity", o.connectivity},
          {"max-dilation-iters", o.max_dilation_iters}};
}

json reports_json(const std::vector<ComponentReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back({{"original_voxels", r.original_voxels},
                   {"dilation_iters", r.dilation_iters},
                   {"dilated_voxels", r.dilated_voxels},
                   {"threshold", r.threshold},
                   {"ring_included", r.ring_included},
                   {"ring_excluded", r.ring_excluded}});
  }
  return arr;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

/// Runs the shared tail of every command: manifest, commit, stderr summary.
class Run {
 public:
  Run(std::string command, const GlobalOpts& g) : command_(std::move(command)), g_(g) {}

  json manifest(const json& config, const std::vector<fs::path>& inputs,
                const std::vector<std::string>& outputs, const json& seeds) const {
    json in = json::array();
    for (const auto& p : inputs) in.push_back(p.string());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return {{"tool", "fuselab"},
            {"version", kVersion},
            {"command", command_},
            {"config", config},
            {"inputs", in},
            {"outputs", outputs},
            {"seeds", seeds},
            {"threads", g_.threads},
            {"isa", std::string(simd::isa_name(simd::active_isa()))},
            {"duration_seconds", secs}};
  }

  json global_config() const {
    return {{"threads", g_.threads}, {"seed", g_.seed}, {"force", g_.force}, {"isa", g_.isa}};
  }

 private:
  std::string command_;
  const GlobalOpts& g_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ExpertStack load_stack(const std::vector<std::string>& inputs) {
  ExpertStack stack;
  for (const auto& in : inputs) {
    stack.experts.push_back(read_svol(in));
    stack.expert_ids.push_back(fs::path(in).stem().string());
  }
  validate_stack(stack);
  return stack;
}

int cmd_fuse(const FuseOpts& o, const GlobalOpts& g, std::ostream& err) {
  if (o.inputs.empty()) throw UsageError("fuse needs at least one input SVOL");
  Run run("fuse", g);

  FusionConfig fc;
  fc.init_sensitivity = o.init_sens;
  fc.init_specificity = o.init_spec;
  fc.max_iters = o.max_iters;
  fc.tol = o.tol;
  fc.mc_samples = o.mc_samples;
  fc.mc_seed = g.seed;
  fc.mstep_mode = parse_mstep_mode(o.mstep);
  fc.threads = g.threads;
  if (o.prior != "auto") {
    try {
      std::size_t used = 0;
      fc.prior = std::stod(o.prior, &used);
      if (used != o.prior.size()) throw std::invalid_argument(o.prior);
    } catch (const std::exception&) {
      throw UsageError("--prior must be 'auto' or a number, got '" + o.prior + "'");
    }
  }
  if (o.variant != "auto") fc.variant = parse_variant(o.variant);
  std::optional<SoftMaskConfig> mask_cfg;
  if (!o.flair.empty()) mask_cfg = to_mask_config(o.mask);

  std::vector<fs::path> inputs = as_paths(o.inputs);
  if (!o.flair.empty()) inputs.push_back(o.flair);
  OutputStage stage(o.output, g.force, inputs);
  for (const char* name : {"posterior.svol", "params.json", "manifest.json"}) stage.claim(name);
  if (o.binarize) stage.claim("consensus.svol");
  fc.validate();

  ExpertStack stack = load_stack(o.inputs);
  const bool binary_inputs = stack.kind() == VoxelKind::kBinaryLabel;
  if (o.variant == "auto") fc.variant = binary_inputs ? Variant::kBinary : Variant::kSoftExact;
  const bool soft_variant = fc.variant != Variant::kBinary;
  if (!binary_inputs && !soft_variant) {
    throw UsageError("soft inputs need a soft variant (soft-exact, soft-mc, simplified)");
  }
  json mask_reports;
  if (binary_inputs && soft_variant) {
    if (!mask_cfg) {
      throw UsageError("variant " + std::string(variant_name(fc.variant)) +
                       " on binary inputs needs --flair to build soft masks first");
    }
    const VolumeGrid flair = read_svol(o.flair);
    ExpertStack soft;
    soft.expert_ids = stack.expert_ids;
    for (const auto& grid : stack.experts) {
      auto sm = build_soft_mask_report(grid, flair, *mask_cfg);
      mask_reports.push_back(reports_json(sm.components));
      soft.experts.push_back(std::move(sm.mask));
    }
    stack = std::move(soft);
  }

  FusionResult result;
  try {
    result = fuse(stack, fc);
  } catch (const DegeneratePosterior& e) {
    err << "fuse: " << e.what() << " for every expert (side: "
        << (e.side() == DegeneratePosterior::Side::kSensitivity ? "sensitivity" : "specificity")
        << ", after " << e.partial_trace().size() << " completed iterations)\n";
    return kDegenerate;
  }

  json experts = json::array();
  for (std::size_t i = 0; i < stack.size(); ++i) {
    experts.push_back({{"id", stack.expert_ids[i]},
                       {"sensitivity", result.params[i].sensitivity},
                       {"specificity", result.params[i].specificity}});
  }
  const json params = {{"variant", variant_name(fc.variant)},
                       {"mstep", mstep_mode_name(fc.mstep_mode)},
                       {"prior", result.prior},
                       {"converged", result.converged},
                       {"iters_run", result.iters_run},
                       {"objective_approximate", result.objective_approximate},
                       {"ll_trace", result.ll_trace},
                       {"experts", experts}};

  stage.write_svol("posterior.svol", result.posterior);
  if (o.binarize) stage.write_svol("consensus.svol", binarize(result.posterior, o.threshold));
  stage.write_text("params.json", params.dump(2) + "\n");

  json config = run.global_config();
  json fuse_cfg = {{"inputs", o.inputs},
                   {"output", o.output},
                   {"variant", variant_name(fc.variant)},
                   {"mstep", o.mstep},
                   {"prior", o.prior},
                   {"init-sens", o.init_sens},
                   {"init-spec", o.init_spec},
                   {"max-iters", o.max_iters},
                   {"tol", o.tol},
                   {"mc-samples", o.mc_samples},
                   {"binarize", o.binarize},
                   {"threshold", o.threshold}};
  if (!o.flair.empty()) {
    fuse_cfg["flair"] = o.flair;
    fuse_cfg.update(mask_json(o.mask));
  }
  config["fuse"] = fuse_cfg;
  json manifest = run.manifest(config, inputs, stage.names(), {{"mc_seed", g.seed}});
  if (!mask_reports.is_null()) manifest["softmask_components"] = mask_reports;
  stage.write_text("manifest.json", manifest.dump(2) + "\n");
  stage.commit();
  err << "fuse: " << variant_name(fc.variant) << ", " << result.iters_run << " iterations, "
      << (result.converged ? "converged" : "not converged") << "\n";
  return kOk;
}

int cmd_softmask(const SoftmaskCmdOpts& o, const GlobalOpts& g, std::ostream& err) {
  if (o.inputs.empty()) throw UsageError("softmask needs at least one binary SVOL");
  if (o.flair.empty()) throw UsageError("softmask needs --flair");
  Run run("softmask", g);
  const SoftMaskConfig cfg = to_mask_config(o.mask);
  std::vector<fs::path> inputs = as_paths(o.inputs);
  inputs.push_back(o.flair);
  OutputStage stage(o.output, g.force, inputs);
  std::vector<std::string> names;
  for (const auto& in : o.inputs) {
    names.push_back(fs::path(in).stem().string() + ".svol");
    stage.claim(names.back());
  }
  stage.claim("manifest.json");

  const VolumeGrid flair = read_svol(o.flair);
  json reports = json::object();
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    const VolumeGrid binary = read_svol(o.inputs[i]);
    auto sm = build_soft_mask_report(binary, flair, cfg);
    reports[names[i]] = reports_json(sm.components);
    stage.write_svol(names[i], sm.mask);
  }

  json config = run.global_config();
  json sub = {{"inputs", o.inputs}, {"flair", o.flair}, {"output", o.output}};
  sub.update(mask_json(o.mask));
  config["softmask"] = sub;
  json manifest = run.manifest(config, inputs, stage.names(), json::object());
  manifest["components"] = reports;
  stage.write_text("manifest.json", manifest.dump(2) + "\n");
  stage.commit();
  err << "softmask: wrote " << names.size() << " soft masks\n";
  return kOk;
}

int cmd_simulate(const SimulateOpts& o, const GlobalOpts& g, bool seed_given, std::ostream& err) {
  if (o.sim_config.empty()) throw UsageError("simulate needs a config JSON path");
  Run run("simulate", g);
  json raw;
  {
    std::ifstream f(o.sim_config);
    if (!f) throw UsageError("cannot open simulation config " + o.sim_config);
    try {
      f >> raw;
    } catch (const json::exception& e) {
      throw UsageError("simulation config is not valid JSON: " + std::string(e.what()));
    }
  }
  if (seed_given && raw.is_object()) raw["seed"] = g.seed;
  const synth::SimulationConfig sim = synth::parse_simulation_config(raw);

  OutputStage stage(o.output, g.force, {fs::path(o.sim_config)});
  stage.claim("truth.svol");
  stage.claim("flair.svol");
  for (const auto& r : sim.panel.raters) stage.claim("expert_" + r.id + ".svol");
  stage.claim("manifest.json");

  const auto phantom = synth::generate_phantom(sim.phantom);
  const auto stack = synth::simulate_raters(phantom.truth, sim.panel, g.threads);
  stage.write_svol("truth.svol", phantom.truth);
  stage.write_svol("flair.svol", phantom.flair);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    stage.write_svol("expert_" + stack.expert_ids[i] + ".svol", stack.experts[i]);
  }

  json config = run.global_config();
  // Record the seed actually used so a rerun from this config overrides nothing.
  config["seed"] = sim.phantom.seed;
  config["simulate"] = {{"config", o.sim_config}, {"output", o.output}};
  json manifest = run.manifest(config, {fs::path(o.sim_config)}, stage.names(), {{"seed", sim.phantom.seed}});
  manifest["simulation"] = synth::to_json(sim);
  stage.write_text("manifest.json", manifest.dump(2) + "\n");
  stage.commit();
  err << "simulate: " << stack.size() << " raters on " << to_string(sim.phantom.dims) << "\n";
  return kOk;
}

int cmd_eval(const EvalOpts& o, const GlobalOpts& g, std::ostream& out) {
  if (o.truth.empty() || o.pred.empty()) throw UsageError("eval needs a truth and a prediction SVOL");
  Run run("eval", g);
  const std::vector<fs::path> inputs{o.truth, o.pred};
  std::optional<OutputStage> stage;
  if (!o.output.empty()) {
    stage.emplace(o.output, g.force, inputs);
    stage->claim("eval.json");
    stage->claim("manifest.json");
  }
  const VolumeGrid truth = read_svol(o.truth);
  const VolumeGrid pred = read_svol(o.pred);
  const json report = to_json(precision_recall(truth, pred, o.threshold, o.binarize_truth));
  if (stage) {
    stage->write_text("eval.json", report.dump(2) + "\n");
    json config = run.global_config();
    config["eval"] = {{"truth", o.truth},
                      {"pred", o.pred},
                      {"threshold", o.threshold},
                      {"binarize-truth", o.binarize_truth},
                      {"output", o.output}};
    stage->write_text("manifest.json", run.manifest(config, inputs, stage->names(), json::object()).dump(2) + "\n");
    stage->commit();
  }
  out << report.dump() << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consensus fusion of expert segmentations (binary and soft STAPLE)", "fuselab"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalOpts g;
  app.add_option("--threads", g.threads, "Worker threads; results depend on this value")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
      ->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for simulate and the soft-mc sampler")->capture_default_str();
  app.add_flag("--force", g.force, "Overwrite existing outputs");
  app.add_option("--isa", g.isa, "Kernel set: auto, scalar, avx2, neon")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}))
      ->capture_default_str();
  app.set_config("--config", "", "JSON file with option values; command-line flags win");

  FuseOpts fo;
  auto* fuse = app.add_subcommand("fuse", "Fuse expert annotations into a consensus posterior");
  fuse->add_option("inputs", fo.inputs, "Expert SVOL files");
  fuse->add_option("-o,--output", fo.output, "Output directory")->required();
  fuse->add_option("--variant", fo.variant, "auto, binary, soft-exact, soft-mc, simplified")
      ->check(CLI::IsMember({"auto", "binary", "soft-exact", "soft-mc", "simplified"}))
      ->capture_default_str();
  fuse->add_option("--mstep", fo.mstep, "expected-count or plugin-mean")
      ->check(CLI::IsMember({"expected-count", "plugin-mean"}))
      ->capture_default_str();
  fuse->add_option("--prior", fo.prior, "Lesion prior, or 'auto' for the mean vote")->capture_default_str();
  fuse->add_option("--init-sens", fo.init_sens)->capture_default_str();
  fuse->add_option("--init-spec", fo.init_spec)->capture_default_str();
  fuse->add_option("--max-iters", fo.max_iters)->capture_default_str();
  fuse->add_option("--tol", fo.tol)->capture_default_str();
  fuse->add_option("--mc-samples", fo.mc_samples)->capture_default_str();
  fuse->add_flag("--binarize", fo.binarize, "Also write consensus.svol");
  fuse->add_option("--threshold", fo.threshold, "Binarization threshold (ties go to 0)")->capture_default_str();
  fuse->add_option("--flair", fo.flair, "FLAIR SVOL; builds soft masks from binary inputs first");
  add_softmask_flags(fuse, fo.mask);

  SoftmaskCmdOpts so;
  auto* softmask = app.add_subcommand("softmask", "Build soft masks from binary annotations and FLAIR");
  softmask->add_option("inputs", so.inputs, "Binary SVOL files");
  softmask->add_option("--flair", so.flair, "FLAIR SVOL");
  softmask->add_option("-o,--output", so.output, "Output directory")->required();
  add_softmask_flags(softmask, so.mask);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a phantom, FLAIR and simulated raters");
  simulate->add_option("config", sim.sim_config, "Simulation config JSON");
  simulate->add_option("-o,--output", sim.output, "Output directory")->required();

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Dice, precision and recall of a prediction");
  eval->add_option("truth", eo.truth, "Truth SVOL");
  eval->add_option("pred", eo.pred, "Prediction SVOL");
  eval->add_option("--threshold", eo.threshold)->capture_default_str();
  eval->add_flag("--binarize-truth", eo.binarize_truth, "Threshold a soft truth instead of rejecting it");
  eval->add_option("-o,--output", eo.output, "Optional directory for eval.json and a manifest");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto requested = simd::parse_isa(g.isa);
    if (!simd::isa_supported(requested)) throw UsageError("ISA " + g.isa + " is not available on this CPU");
    simd::set_isa(requested);

    if (*fuse) return cmd_fuse(fo, g, err);
    if (*softmask) return cmd_softmask(so, g, err);
    if (*simulate) return cmd_simulate(sim, g, seed_opt->count() > 0, err);
    return cmd_eval(eo, g, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return e.reason() == ValidationError::Reason::kBadConfig ? kUsage : kBadInput;
  } catch (const DegeneratePosterior& e) {
    err << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace fuselab::cli
