// SPDX-License-Identifier: Apache-2.0
#include "sgn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "sgn/errors.hpp"
#include "sgn/eval.hpp"
#include "sgn/training.hpp"

namespace sgn {

namespace {

namespace fs = std::filesystem;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

// Writes via a sibling temporary file so that a failed run leaves nothing behind.
void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << content;
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("write failed for '" + path + "'");
    }
  }
  fs::rename(tmp, path);
}

void ensure_writable(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw DataError("output directory '" + parent.string() + "' does not exist");
  }
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
  SyntheticConfig c;
  try {
    c.J = j.value("J", c.J);
    c.K = j.value("K", c.K);
    c.frames = j.value("frames", c.frames);
    c.per_class = j.value("per_class", c.per_class);
    c.noise = j.value("noise", c.noise);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.seed = j.value("seed", c.seed);
    c.templates = j.value("templates", c.templates);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  return c;
}

struct TrainSetup {
  ModelConfig model;
  TrainRecipe recipe;
  Precision precision = Precision::f32;
};

// {"model": {...}, "recipe": {...}, "precision": "f32"|"f64"}; J and K
// default to the dataset's.
TrainSetup train_setup_from_json(const nlohmann::json& j, const DatasetManifest& data) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainSetup s;
  nlohmann::json model = j.value("model", nlohmann::json::object());
  if (!model.is_object()) throw ConfigError("train config: 'model' must be an object");
  if (!model.contains("J")) model["J"] = data.J;
  if (!model.contains("K")) model["K"] = data.K;
  s.model = model_config_from_json(model);
  s.recipe = train_recipe_from_json(j.value("recipe", nlohmann::json::object()));
  const std::string p = j.value("precision", std::string("f32"));
  if (p != "f32" && p != "f64") throw ConfigError("train config: precision must be f32 or f64");
  s.precision = p == "f32" ? Precision::f32 : Precision::f64;
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

template <typename Real>
std::string run_training(const TrainSetup& setup, const DatasetManifest& data, std::ostream& out,
                         std::string& log_csv) {
  Model<Real> model(setup.model, setup.recipe.seed);
  std::ostringstream log;
  write_train_log_header(log);
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochLog& e) {
    write_train_log_row(log, e);
    out << "epoch " << e.epoch << " lr " << e.lr << " loss " << fixed(e.train_loss, 4) << " train_acc "
        << fixed(e.train_acc, 4) << " val_acc " << (std::isnan(e.val_acc) ? "-" : fixed(e.val_acc, 4)) << " ("
        << fixed(e.wall_seconds, 1) << "s)\n";
    out.flush();
  };
  train(model, data, setup.recipe, cb);
  log_csv = log.str();
  return serialize_checkpoint(model);
}

template <typename Real>
EvalReport run_eval(const std::string& path, const DatasetManifest& data, const EvalOptions& opt) {
  Model<Real> model = load_checkpoint<Real>(path);
  return evaluate(model, data, opt);
}

template <typename Real>
std::vector<SmpRow> run_smp(const std::string& path, const DatasetManifest& data, std::size_t top,
                            std::uint64_t seed, std::optional<Split> split) {
  Model<Real> model = load_checkpoint<Real>(path);
  return smp_report(model, data, top, seed, split);
}

nlohmann::ordered_json report_json(const EvalReport& r, const DatasetManifest& data) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["total"] = r.total;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < r.per_class_accuracy.size(); ++k) {
    const std::string name = k < data.class_names.size() ? data.class_names[k] : std::to_string(k);
    per[name] = std::isnan(r.per_class_accuracy[k]) ? nlohmann::ordered_json(nullptr)
                                                    : nlohmann::ordered_json(r.per_class_accuracy[k]);
  }
  j["per_class_accuracy"] = per;
  j["confusion"] = r.confusion;
  return j;
}

// Horizontal bars of the summed top-k counts per joint.
std::string smp_svg(std::span<const SmpRow> rows, std::size_t top) {
  std::map<std::size_t, std::size_t> totals;
  for (const SmpRow& r : rows) totals[r.joint] += r.count;
  std::vector<std::pair<std::size_t, std::size_t>> bars(totals.begin(), totals.end());
  std::stable_sort(bars.begin(), bars.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (bars.size() > top) bars.resize(top);
  const std::size_t peak = bars.empty() ? 1 : std::max<std::size_t>(1, bars.front().second);
  const int width = 480, bar_h = 24, left = 80;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << (bars.size() * (bar_h + 8) + 16) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double w = (width - left - 60) * static_cast<double>(bars[i].second) / static_cast<double>(peak);
    const std::size_t y = 8 + i * (bar_h + 8);
    s << "  <text x=\"4\" y=\"" << y + 16 << "\">joint " << bars[i].first << "</text>\n";
    s << "  <rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << fixed(w, 1) << "\" height=\"" << bar_h
      << "\" fill=\"#4878a8\"/>\n";
    s << "  <text x=\"" << left + w + 4 << "\" y=\"" << y + 16 << "\">" << bars[i].second << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantics-guided skeleton action recognition", "sgn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sgn 1.0");

  const auto presets = preset_names();
  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed")->capture_default_str(); };

  // synth
  std::string synth_config, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic skeleton dataset");
  synth->add_option("--config", synth_config, "Generator settings (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Dataset file to write (JSON lines)")->required();
  add_seed(synth);

  // train
  std::string train_config, train_data, train_out, train_log;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train_config, "Model, recipe and precision (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_data, "Dataset file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Checkpoint to write")->required();
  train_cmd->add_option("--log", train_log, "Training log CSV (default: <out>.log.csv)");
  add_seed(train_cmd);

  // eval
  std::string eval_model, eval_data, eval_out, eval_split = "test";
  std::size_t eval_samples = 5;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--samples", eval_samples, "Clip samplings averaged per sequence")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--split", eval_split, "Split to score")->capture_default_str()->check(
      CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", eval_out, "Report JSON to write");
  add_seed(eval_cmd);

  // ablate
  std::string ablate_suite = "table1", ablate_data, ablate_md, ablate_csv, ablate_config;
  std::size_t ablate_J = 25, ablate_T = 20, ablate_K = 60, ablate_div = 1;
  std::optional<std::size_t> ablate_epochs;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation suite (Markdown and CSV tables)");
  ablate->add_option("--suite", ablate_suite, "table1, table2, table3, probes or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"table1", "table2", "table3", "probes", "all"}));
  ablate->add_option("--data", ablate_data, "Train and evaluate every preset on this dataset")
      ->check(CLI::ExistingFile);
  ablate->add_option("--recipe", ablate_config, "Training recipe (JSON, default: desk schedule)")
      ->check(CLI::ExistingFile);
  ablate->add_option("--epochs", ablate_epochs, "Override the recipe's epoch count (drops later milestones)");
  ablate->add_option("--joints", ablate_J, "J for parameter counts")->capture_default_str();
  ablate->add_option("--frames", ablate_T, "T")->capture_default_str();
  ablate->add_option("--classes", ablate_K, "K for parameter counts")->capture_default_str();
  ablate->add_option("--width-divisor", ablate_div, "Shrink channel widths for training runs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ablate->add_option("--markdown", ablate_md, "Markdown table to write (default: stdout)");
  ablate->add_option("--csv", ablate_csv, "CSV table to write");
  add_seed(ablate);

  // params
  std::string params_preset = "sgn";
  std::size_t params_J = 25, params_T = 20, params_K = 60;
  auto* params = app.add_subcommand("params", "Count trainable parameters of a preset");
  params->add_option("--preset", params_preset, "Architecture preset")
      ->capture_default_str()
      ->check(CLI::IsMember(presets));
  params->add_option("--joints", params_J, "J")->capture_default_str()->check(CLI::PositiveNumber);
  params->add_option("--frames", params_T, "T")->capture_default_str()->check(CLI::PositiveNumber);
  params->add_option("--classes", params_K, "K")->capture_default_str()->check(CLI::PositiveNumber);
  add_seed(params);

  // gradcheck
  std::string gc_preset = "sgn";
  bool gc_small = false;
  ModelGradcheckOptions gc_opt;
  std::size_t gc_J = 25, gc_T = 20, gc_K = 60;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc->add_option("--preset", gc_preset, "Architecture preset")->capture_default_str()->check(CLI::IsMember(presets));
  gc->add_flag("--small", gc_small, "J=4, T=5, K=3 with channel widths divided by 8");
  gc->add_option("--joints", gc_J, "J (ignored with --small)")->capture_default_str();
  gc->add_option("--frames", gc_T, "T (ignored with --small)")->capture_default_str();
  gc->add_option("--classes", gc_K, "K (ignored with --small)")->capture_default_str();
  gc->add_option("--coordinates", gc_opt.coordinates, "Sampled coordinates")->capture_default_str();
  gc->add_option("--epsilon", gc_opt.epsilon, "Finite-difference step")->capture_default_str();
  add_seed(gc);

  // smp-vis
  std::string smp_model, smp_input, smp_out, smp_svg_path, smp_split;
  std::size_t smp_top = 5;
  auto* smp = app.add_subcommand("smp-vis", "Joints most often selected by spatial max-pooling");
  smp->add_option("--model", smp_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  smp->add_option("--input", smp_input, "Dataset file")->required()->check(CLI::ExistingFile);
  smp->add_option("--top", smp_top, "Joints per sequence")->capture_default_str()->check(CLI::PositiveNumber);
  smp->add_option("--split", smp_split, "Only this split")->check(CLI::IsMember({"train", "val", "test"}));
  smp->add_option("--out", smp_out, "CSV to write (default: stdout)");
  smp->add_option("--svg", smp_svg_path, "Bar chart of summed counts");
  add_seed(smp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      SyntheticConfig cfg = synth_config.empty() ? SyntheticConfig{} : synthetic_config_from_json(read_json_file(synth_config));
      if (synth->count("--seed")) cfg.seed = seed;
      ensure_writable(synth_out);
      const DatasetManifest m = generate_synthetic(cfg);
      std::ostringstream text;
      write_dataset(m, text);
      write_file_atomic(synth_out, text.str());
      out << "wrote " << m.sequences.size() << " sequences (J=" << m.J << ", K=" << m.K << ") to " << synth_out
          << "\n";
    } else if (train_cmd->parsed()) {
      const DatasetManifest data = parse_dataset(train_data);
      TrainSetup setup = train_setup_from_json(read_json_file(train_config), data);
      if (train_cmd->count("--seed")) setup.recipe.seed = seed;
      const std::string log_path = train_log.empty() ? train_out + ".log.csv" : train_log;
      ensure_writable(train_out);
      ensure_writable(log_path);
      std::string log_csv;
      const std::string bytes = setup.precision == Precision::f32
                                    ? run_training<float>(setup, data, out, log_csv)
                                    : run_training<double>(setup, data, out, log_csv);
      write_file_atomic(log_path, log_csv);
      write_file_atomic(train_out, bytes);
      out << "wrote " << train_out << " and " << log_path << "\n";
    } else if (eval_cmd->parsed()) {
      const DatasetManifest data = parse_dataset(eval_data);
      EvalOptions opt;
      opt.samples = eval_samples;
      opt.seed = seed;
      opt.split = parse_split(eval_split);
      if (!eval_out.empty()) ensure_writable(eval_out);
      const EvalReport r = checkpoint_precision(eval_model) == Precision::f32
                               ? run_eval<float>(eval_model, data, opt)
                               : run_eval<double>(eval_model, data, opt);
      out << "accuracy " << fixed(r.accuracy, 4) << " (" << r.total << " items, " << r.samples
          << " samples, seed " << r.seed << ")\n";
      if (!eval_out.empty()) write_file_atomic(eval_out, report_json(r, data).dump(2) + "\n");
    } else if (ablate->parsed()) {
      AblationOptions opt;
      opt.J = ablate_J;
      opt.T = ablate_T;
      opt.K = ablate_K;
      opt.seed = seed;
      opt.width_divisor = ablate_div;
      opt.eval.seed = seed;
      if (!ablate_config.empty()) opt.recipe = train_recipe_from_json(read_json_file(ablate_config));
      if (ablate_epochs) {
        opt.recipe.epochs = *ablate_epochs;
        std::erase_if(opt.recipe.milestones, [&](std::size_t m) { return m >= *ablate_epochs; });
        opt.recipe.validate();
      }
      std::optional<DatasetManifest> data;
      if (!ablate_data.empty()) {
        data = parse_dataset(ablate_data);
        opt.J = data->J;
        opt.K = data->K;
        opt.data = &*data;
      }
      if (!ablate_md.empty()) ensure_writable(ablate_md);
      if (!ablate_csv.empty()) ensure_writable(ablate_csv);
      const std::vector<std::string> suites =
          ablate_suite == "all" ? std::vector<std::string>{"table1", "table2", "table3"}
                                : std::vector<std::string>{ablate_suite};
      std::ostringstream md, csv;
      bool all_match = true;
      for (std::size_t i = 0; i < suites.size(); ++i) {
        const AblationReport r = run_ablation_suite(suites[i], opt);
        if (i > 0) md << "\n";
        write_ablation_markdown(md, r);
        std::ostringstream one;
        write_ablation_csv(one, r);
        const std::string text = one.str();
        csv << (i == 0 ? text : text.substr(text.find('\n') + 1));
        for (const auto& row : r.rows) all_match &= row.count_matches;
      }
      if (!ablate_md.empty()) {
        write_file_atomic(ablate_md, md.str());
      } else {
        out << md.str();
      }
      if (!ablate_csv.empty()) write_file_atomic(ablate_csv, csv.str());
      if (!all_match) {
        err << "error: parameter counts outside the reference tolerance\n";
        return kExitRuntime;
      }
    } else if (params->parsed()) {
      out << count_parameters(model_preset(params_preset, params_J, params_T, params_K)) << "\n";
    } else if (gc->parsed()) {
      const ModelConfig cfg = gc_small ? small_gradcheck_config(gc_preset) : model_preset(gc_preset, gc_J, gc_T, gc_K);
      gc_opt.seed = seed;
      const GradcheckResult r = model_gradcheck(cfg, gc_opt);
      const bool pass = r.max_relative_error < 1e-4;
      out << "max relative error " << std::scientific << std::setprecision(3) << r.max_relative_error
          << " (max absolute " << r.max_absolute_error << ") over " << r.coordinates << " coordinates: "
          << (pass ? "PASS" : "FAIL") << "\n"
          << std::defaultfloat;
      if (!pass) return kExitRuntime;
    } else if (smp->parsed()) {
      const DatasetManifest data = parse_dataset(smp_input);
      std::optional<Split> split;
      if (!smp_split.empty()) split = parse_split(smp_split);
      if (!smp_out.empty()) ensure_writable(smp_out);
      if (!smp_svg_path.empty()) ensure_writable(smp_svg_path);
      const auto rows = checkpoint_precision(smp_model) == Precision::f32
                            ? run_smp<float>(smp_model, data, smp_top, seed, split)
                            : run_smp<double>(smp_model, data, smp_top, seed, split);
      std::ostringstream csv;
      write_smp_csv(csv, rows);
      if (!smp_svg_path.empty()) write_file_atomic(smp_svg_path, smp_svg(rows, smp_top));
      if (!smp_out.empty()) {
        write_file_atomic(smp_out, csv.str());
      } else {
        out << csv.str();
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sgn
