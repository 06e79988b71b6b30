// timedit: offline surgery on the cross-attention key/value projections of a
// tensor checkpoint, with a built-in simulator for verifying edit semantics
// and a bisection calibrator for edit strength.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "timedit/checkpoint.hpp"
#include "timedit/debias.hpp"
#include "timedit/debias_sim.hpp"
#include "timedit/edit.hpp"
#include "timedit/errors.hpp"
#include "timedit/eval.hpp"
#include "timedit/fixture.hpp"
#include "timedit/sim_eval.hpp"
#include "timedit/tensor_store.hpp"
#include "timedit/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace timedit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::InvalidLambda:
    case ErrorCode::Diverged:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

json load_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::BadRequest, "cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct PatternFlags {
  std::string key_suffix = ".attn2.to_k.weight";
  std::string value_suffix = ".attn2.to_v.weight";
  bool transpose = false;

  LayerPatterns patterns() const { return {key_suffix, value_suffix, transpose}; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--key-pattern", key_suffix, "Suffix of key projection tensor names");
    cmd->add_option("--value-pattern", value_suffix, "Suffix of value projection tensor names");
    cmd->add_flag("--transpose", transpose,
                  "Checkpoint stores projections as (embed x out) instead of (out x embed)");
  }
};

// ---------------------------------------------------------------------------
// edit

struct EditArgs {
  std::string weights, edits, embeddings, out;
  double lambda = 0.1;
  bool value_only = false;
  bool force = false;
  PatternFlags patterns;
};

int run_edit(const EditArgs& args, bool lambda_flag_given) {
  const TensorFile weights = load_tensor_file(args.weights);
  const TensorFile embeddings = load_tensor_file(args.embeddings);
  const EditRequest request = parse_edit_request(load_json(args.edits));

  double lambda = 0.1;
  if (lambda_flag_given)
    lambda = args.lambda;
  else if (request.has_lambda)
    lambda = request.lambda;

  if (lambda < 0.01 && !args.force) {
    std::cerr << "refusing lambda " << lambda
              << ": the closed-form solve is numerically unstable below 0.01 "
                 "(use --force to proceed anyway)\n";
    return kExitUsage;
  }

  CheckpointLayers layers = discover_layers(weights, args.patterns.patterns());
  for (const std::string& name : layers.unpaired)
    std::cerr << "warning: pattern matched '" << name << "' without a partner; left untouched\n";

  const std::vector<EditContext> contexts = build_edit_contexts(request, embeddings, lambda);
  const ModelWeights edited = multi_edit(layers.model, contexts, !args.value_only);
  const auto bytes = save_with_layers(weights, layers, edited);
  write_file_bytes(args.out, bytes);

  cli::write_manifest(args.out, "edit",
                      json{{"weights", args.weights},
                           {"edits", args.edits},
                           {"embeddings", args.embeddings},
                           {"lambda", lambda},
                           {"value_only", args.value_only},
                           {"key_pattern", args.patterns.key_suffix},
                           {"value_pattern", args.patterns.value_suffix},
                           {"transpose", args.patterns.transpose},
                           {"force", args.force}},
                      {args.weights, args.edits, args.embeddings});
  std::cout << "edited " << edited.layers.size() << " layer(s) at lambda " << lambda << " -> "
            << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string dataset, original, edited, embeddings, out;
  std::size_t seeds = 24;
  std::size_t queries = 8;
  std::uint64_t base_seed = 1;
  PatternFlags patterns;
};

int run_eval(const EvalArgs& args) {
  const TensorFile original_file = load_tensor_file(args.original);
  const TensorFile edited_file = load_tensor_file(args.edited);
  const TensorFile embeddings = load_tensor_file(args.embeddings);
  const std::vector<EvalEntry> entries = parse_eval_dataset(load_json(args.dataset));

  const CheckpointLayers original = discover_layers(original_file, args.patterns.patterns());
  const CheckpointLayers edited = discover_layers(edited_file, args.patterns.patterns());

  SimEvalOptions options;
  options.seeds = args.seeds;
  options.query_count = args.queries;
  options.base_seed = args.base_seed;
  const SimEvalResult result =
      run_simulated_eval(original.model, edited.model, embeddings, entries, options);

  json doc;
  doc["schema_version"] = 1;
  doc["seeds"] = args.seeds;
  doc["metrics"] = {
      {"efficacy", {{"mean", result.report.efficacy.mean}, {"std", result.report.efficacy.std_dev}}},
      {"generality",
       {{"mean", result.report.generality.mean}, {"std", result.report.generality.std_dev}}},
      {"specificity",
       {{"mean", result.report.specificity.mean}, {"std", result.report.specificity.std_dev}}},
      {"harmonic_mean", result.report.harmonic_mean}};
  doc["outcomes"] = json::array();
  for (const TrialOutcome& outcome : result.outcomes) {
    json labels = json::array();
    for (Label label : outcome.classifications)
      labels.push_back(label == Label::SourceLabel ? "source" : "destination");
    const char* kind = outcome.kind == PromptKind::Source
                           ? "source"
                           : outcome.kind == PromptKind::Positive ? "positive" : "negative";
    doc["outcomes"].push_back(
        {{"prompt", outcome.prompt_id}, {"kind", kind}, {"classifications", labels}});
  }
  write_text(args.out, doc.dump(2) + "\n");

  cli::write_manifest(args.out, "eval",
                      json{{"dataset", args.dataset},
                           {"original", args.original},
                           {"edited", args.edited},
                           {"embeddings", args.embeddings},
                           {"seeds", args.seeds},
                           {"queries", args.queries},
                           {"base_seed", args.base_seed},
                           {"key_pattern", args.patterns.key_suffix},
                           {"value_pattern", args.patterns.value_suffix},
                           {"transpose", args.patterns.transpose}},
                      {args.dataset, args.original, args.edited, args.embeddings});

  std::printf("efficacy    %.4f +/- %.4f\n", result.report.efficacy.mean,
              result.report.efficacy.std_dev);
  std::printf("generality  %.4f +/- %.4f\n", result.report.generality.mean,
              result.report.generality.std_dev);
  std::printf("specificity %.4f +/- %.4f\n", result.report.specificity.mean,
              result.report.specificity.std_dev);
  std::printf("harmonic    %.4f\n", result.report.harmonic_mean);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// debias

struct DebiasArgs {
  std::string dataset, out;
  std::string oracle = "builtin";
  std::string oracle_cmd;
  double tolerance = 0.1;
  double lambda_low = 1e-4;
  double lambda_high = 1e8;
  int max_iterations = 30;
  int probe_samples = 3;
  bool multi = false;
  std::size_t seeds = 24;
  std::uint64_t world_seed = 2024;
};

double run_command_oracle(const std::string& command, double lambda) {
  char formatted[64];
  std::snprintf(formatted, sizeof(formatted), "%.17g", lambda);
  const std::string full = command + " " + formatted;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(full.c_str(), "r"), pclose);
  if (!pipe) fail(ErrorCode::OracleFailure, "cannot spawn oracle command");
  double value = 0.0;
  const int matched = std::fscanf(pipe.get(), "%lf", &value);
  if (matched != 1) fail(ErrorCode::OracleFailure, "oracle printed no number");
  return value;
}

int run_debias(const DebiasArgs& args) {
  const std::vector<ProfessionEntry> professions =
      parse_profession_dataset(load_json(args.dataset));

  SimWorldConfig world_config;
  world_config.seeds = args.seeds;
  world_config.world_seed = args.world_seed;
  const SimWorld world(professions, world_config);

  SearchConfig base_config;
  base_config.lambda_low = args.lambda_low;
  base_config.lambda_high = args.lambda_high;
  base_config.max_iterations = args.max_iterations;
  base_config.tolerance = args.tolerance;
  base_config.samples_per_probe = args.probe_samples;

  const bool builtin = args.oracle == "builtin";
  if (!builtin && args.oracle != "command")
    fail(ErrorCode::BadRequest, "--oracle must be 'builtin' or 'command'");
  if (!builtin && args.oracle_cmd.empty())
    fail(ErrorCode::BadRequest, "--oracle command requires --oracle-cmd");
  if (!builtin && args.multi)
    fail(ErrorCode::BadRequest, "--multi needs the builtin oracle");

  json rows = json::array();
  std::vector<BiasObservation> achieved;
  bool any_unconverged = false;

  const auto row_json = [](const ProfessionEntry& entry, const SearchResult& result,
                           double female) {
    json probes = json::array();
    for (const Probe& probe : result.probes)
      probes.push_back({{"lambda", probe.lambda},
                        {"nonstereo_fraction", probe.fraction},
                        {"delta", probe.delta}});
    return json{{"profession", entry.profession},
                {"stereotype", entry.stereotype},
                {"lambda", result.lambda_p},
                {"female_fraction", female},
                {"delta", delta_p(female)},
                {"converged", result.converged},
                {"non_monotone_warning", result.non_monotone_warning},
                {"iterations", result.iterations_used},
                {"probes", probes}};
  };

  if (args.multi) {
    SearchConfig config = base_config;
    config.oracle = [&](double lambda) { return world.mean_nonstereo_fraction(lambda); };
    const SearchResult result = search_lambda(config);
    any_unconverged = !result.converged;

    const ModelWeights edited = world.multi_edited_model(result.lambda_p);
    for (const ProfessionEntry& entry : professions) {
      const double female = world.female_fraction(edited, entry.validation_prompt);
      achieved.push_back({entry.profession, female});
      SearchResult per = result;  // shared lambda and probes
      rows.push_back(row_json(entry, per, female));
    }
  } else {
    for (const ProfessionEntry& entry : professions) {
      SearchConfig config = base_config;
      if (builtin) {
        config.oracle = [&](double lambda) { return world.nonstereo_fraction(entry, lambda); };
      } else {
        config.oracle = [&](double lambda) {
          const double female = run_command_oracle(args.oracle_cmd, lambda);
          return entry.stereotype == "male" ? female : 100.0 - female;
        };
      }
      const SearchResult result = search_lambda(config);
      if (!result.converged) any_unconverged = true;
      const double nonstereo = result.achieved.female_fraction;
      const double female =
          entry.stereotype == "male" ? nonstereo : 100.0 - nonstereo;
      achieved.push_back({entry.profession, female});
      rows.push_back(row_json(entry, result, female));
    }
  }

  const BiasReport bias = aggregate_delta(achieved);
  json doc;
  doc["schema_version"] = 1;
  doc["mode"] = args.multi ? "multi" : "per-profession";
  doc["professions"] = rows;
  doc["aggregate"] = {{"delta_mean", bias.delta_mean}, {"delta_std", bias.delta_std}};
  write_text(args.out, doc.dump(2) + "\n");

  cli::write_manifest(args.out, "debias",
                      json{{"dataset", args.dataset},
                           {"oracle", args.oracle},
                           {"oracle_cmd", args.oracle_cmd},
                           {"tolerance", args.tolerance},
                           {"lambda_low", args.lambda_low},
                           {"lambda_high", args.lambda_high},
                           {"max_iterations", args.max_iterations},
                           {"probe_samples", args.probe_samples},
                           {"multi", args.multi},
                           {"seeds", args.seeds},
                           {"world_seed", args.world_seed}},
                      {args.dataset});

  for (const auto& row : rows)
    std::printf("%-14s lambda %-12.5g F_p %6.2f%%  delta %.3f%s\n",
                row["profession"].get<std::string>().c_str(), row["lambda"].get<double>(),
                row["female_fraction"].get<double>(), row["delta"].get<double>(),
                row["converged"].get<bool>() ? "" : "  [not converged]");
  std::printf("aggregate delta %.4f +/- %.4f\n", bias.delta_mean, bias.delta_std);
  if (any_unconverged)
    std::cerr << "warning: some professions did not reach the tolerance\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect

struct InspectArgs {
  std::string weights;
  std::string prefix;
  bool as_json = false;
  PatternFlags patterns;
};

int run_inspect(const InspectArgs& args) {
  const TensorFile file = load_tensor_file(args.weights);
  const CheckpointLayers layers = discover_layers(file, args.patterns.patterns());
  const EditStats stats = edit_stats(file, layers, args.prefix);

  if (args.as_json) {
    json doc;
    doc["schema_version"] = 1;
    doc["tensors"] = json::array();
    for (const TensorHeaderEntry& entry : file.entries())
      doc["tensors"].push_back({{"name", entry.name},
                                {"dtype", std::string(dtype_name(entry.dtype))},
                                {"shape", entry.shape}});
    doc["layer_pairs"] = json::array();
    for (const LayerRef& ref : layers.refs)
      doc["layer_pairs"].push_back(
          {{"prefix", ref.prefix}, {"key", ref.key_name}, {"value", ref.value_name}});
    doc["unpaired"] = layers.unpaired;
    doc["edited_parameters"] = stats.edited_parameters;
    doc["total_parameters"] = stats.total_parameters;
    doc["edited_fraction"] = stats.fraction;
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
  }

  for (const TensorHeaderEntry& entry : file.entries()) {
    std::string shape = "[";
    for (std::size_t i = 0; i < entry.shape.size(); ++i)
      shape += (i ? "," : "") + std::to_string(entry.shape[i]);
    shape += "]";
    std::printf("%-52s %s %s\n", entry.name.c_str(), std::string(dtype_name(entry.dtype)).c_str(),
                shape.c_str());
  }
  std::printf("\ncross-attention pairs: %zu\n", layers.refs.size());
  for (std::size_t i = 0; i < layers.refs.size(); ++i) {
    const LayerWeights& layer = layers.model.layers[i];
    std::printf("  %s  keys %zux%zu  values %zux%zu\n", layers.refs[i].prefix.c_str(),
                layer.w_k.rows(), layer.w_k.cols(), layer.w_v.rows(), layer.w_v.cols());
  }
  for (const std::string& name : layers.unpaired)
    std::printf("  unpaired: %s\n", name.c_str());
  std::printf("edited parameters: %llu of %llu (%.2f%%)\n",
              static_cast<unsigned long long>(stats.edited_parameters),
              static_cast<unsigned long long>(stats.total_parameters), 100.0 * stats.fraction);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// make-fixture

struct FixtureArgs {
  std::string out;
  std::uint64_t seed = 7;
  bool with_backbone = false;
};

int run_make_fixture(const FixtureArgs& args) {
  DeskFixtureParams params;
  params.seed = args.seed;
  const Fixture fixture = make_desk_fixture(params);
  write_fixture(fixture, args.out);
  if (args.with_backbone) {
    const auto tensors = make_backbone_checkpoint();
    write_file_bytes(fs::path(args.out) / "backbone.safetensors",
                     write_file(tensors, Dtype::F32));
  }
  std::cout << "fixture written to " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form editing of cross-attention key/value projections"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  EditArgs edit_args;
  CLI::App* edit_cmd = app.add_subcommand("edit", "Apply an edit request to a checkpoint");
  edit_cmd->add_option("--weights", edit_args.weights, "Input checkpoint (.safetensors)")
      ->required();
  edit_cmd->add_option("--edits", edit_args.edits, "Edit request (.json)")->required();
  edit_cmd->add_option("--embeddings", edit_args.embeddings, "Prompt embeddings (.safetensors)")
      ->required();
  edit_cmd->add_option("--out", edit_args.out, "Output checkpoint path")->required();
  CLI::Option* lambda_opt = edit_cmd->add_option(
      "--lambda", edit_args.lambda, "Regularization strength (default 0.1; file value if set)");
  edit_cmd->add_flag("--value-only", edit_args.value_only,
                     "Replace only the value projections, keep keys untouched");
  edit_cmd->add_flag("--force", edit_args.force, "Proceed even for lambda below 0.01");
  edit_args.patterns.attach(edit_cmd);

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score an edited checkpoint on the built-in simulator");
  eval_cmd->add_option("--dataset", eval_args.dataset, "Evaluation dataset (.json)")->required();
  eval_cmd->add_option("--original", eval_args.original, "Unedited checkpoint")->required();
  eval_cmd->add_option("--edited", eval_args.edited, "Checkpoint under test")->required();
  eval_cmd->add_option("--embeddings", eval_args.embeddings, "Prompt embeddings")->required();
  eval_cmd->add_option("--out", eval_args.out, "Report output path")->required();
  eval_cmd->add_option("--seeds", eval_args.seeds, "Random seeds per prompt (default 24)");
  eval_cmd->add_option("--queries", eval_args.queries, "Query rows per feature (default 8)");
  eval_cmd->add_option("--base-seed", eval_args.base_seed, "First seed value (default 1)");
  eval_args.patterns.attach(eval_cmd);

  DebiasArgs debias_args;
  CLI::App* debias_cmd =
      app.add_subcommand("debias", "Calibrate per-profession edit strength by bisection");
  debias_cmd->add_option("--dataset", debias_args.dataset, "Profession dataset (.json)")
      ->required();
  debias_cmd->add_option("--out", debias_args.out, "Calibration report path")->required();
  debias_cmd->add_option("--oracle", debias_args.oracle,
                         "'builtin' simulator oracle or external 'command'");
  debias_cmd->add_option("--oracle-cmd", debias_args.oracle_cmd,
                         "Command receiving lambda as its last argument, printing F_p");
  debias_cmd->add_option("--tolerance", debias_args.tolerance, "Target delta bound (default 0.1)");
  debias_cmd->add_option("--lambda-low", debias_args.lambda_low, "Bracket low end (default 1e-4)");
  debias_cmd->add_option("--lambda-high", debias_args.lambda_high,
                         "Bracket high end (default 1e8)");
  debias_cmd->add_option("--max-iterations", debias_args.max_iterations,
                         "Probe budget (default 30)");
  debias_cmd->add_option("--probe-samples", debias_args.probe_samples,
                         "Oracle calls averaged per probe (default 3)");
  debias_cmd->add_flag("--multi", debias_args.multi,
                       "One shared lambda over all professions in a single multi-edit");
  debias_cmd->add_option("--seeds", debias_args.seeds, "Seeds per oracle probe (default 24)");
  debias_cmd->add_option("--world-seed", debias_args.world_seed,
                         "Seed of the builtin synthetic world");

  InspectArgs inspect_args;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "List tensors and detected projection pairs");
  inspect_cmd->add_option("--weights", inspect_args.weights, "Checkpoint to inspect")->required();
  inspect_cmd->add_option("--prefix", inspect_args.prefix,
                          "Restrict the parameter count to names under this prefix");
  inspect_cmd->add_flag("--json", inspect_args.as_json, "Machine-readable output");
  inspect_args.patterns.attach(inspect_cmd);

  FixtureArgs fixture_args;
  CLI::App* fixture_cmd =
      app.add_subcommand("make-fixture", "Write the synthetic desk-scale fixture");
  fixture_cmd->add_option("--out", fixture_args.out, "Output directory")->required();
  fixture_cmd->add_option("--seed", fixture_args.seed, "Fixture seed (default 7)");
  fixture_cmd->add_flag("--with-backbone", fixture_args.with_backbone,
                        "Also write the 16-layer backbone-shaped checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(edit_cmd)) return run_edit(edit_args, lambda_opt->count() > 0);
    if (app.got_subcommand(eval_cmd)) return run_eval(eval_args);
    if (app.got_subcommand(debias_cmd)) return run_debias(debias_args);
    if (app.got_subcommand(inspect_cmd)) return run_inspect(inspect_args);
    if (app.got_subcommand(fixture_cmd)) return run_make_fixture(fixture_args);
  } catch (const Error& e) {
    json err{{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    json err{{"error", "Internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
