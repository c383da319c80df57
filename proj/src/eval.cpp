// SPDX-License-Identifier: Apache-2.0
#include "sgn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "sgn/errors.hpp"

namespace sgn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_model_for(const ModelConfig& cfg, const DatasetManifest& manifest, const char* what) {
  if (manifest.J != cfg.J) {
    throw SchemaError(std::string(what) + ": dataset has J=" + std::to_string(manifest.J) +
                      ", model expects J=" + std::to_string(cfg.J));
  }
  if (manifest.K > cfg.K) {
    throw SchemaError(std::string(what) + ": dataset has K=" + std::to_string(manifest.K) +
                      ", model has " + std::to_string(cfg.K) + " outputs");
  }
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

double EvalReport::subset_accuracy(std::span<const int> classes) const {
  std::size_t right = 0, n = 0;
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= confusion.size()) {
      throw ContractError("subset_accuracy: class " + std::to_string(c) + " out of range");
    }
    const auto& row = confusion[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < row.size(); ++k) n += row[k];
    right += row[static_cast<std::size_t>(c)];
  }
  return n == 0 ? kNaN : static_cast<double>(right) / static_cast<double>(n);
}

template <typename Real>
std::vector<std::vector<double>> sequence_scores(Model<Real>& model,
                                                 std::span<const SkeletonSequence* const> sequences,
                                                 const EvalOptions& options) {
  if (options.samples == 0) throw ConfigError("evaluate: samples must be positive");
  if (options.batch_size == 0) throw ConfigError("evaluate: batch_size must be positive");
  const ModelConfig& cfg = model.config();
  TrainRecipe prep;
  prep.reference_joint = options.reference_joint;
  std::vector<std::vector<double>> scores(sequences.size(), std::vector<double>(cfg.K, 0.0));
  const std::size_t items = sequences.size() * options.samples;
  for (std::size_t start = 0; start < items; start += options.batch_size) {
    const std::size_t end = std::min(items, start + options.batch_size);
    std::vector<SkeletonSequence> batch;
    for (std::size_t i = start; i < end; ++i) {
      const SkeletonSequence& s = *sequences[i / options.samples];
      std::mt19937_64 rng = derived_rng(options.seed, s.id + "#" + std::to_string(i % options.samples));
      batch.push_back(preprocess(s, cfg.T, rng, false, prep));
    }
    Tape<Real> tape(false);
    const auto out = model.forward(tape, stack_batch<Real>(batch), false);
    const Real* logits = out.logits.value().data().data();
    for (std::size_t i = start; i < end; ++i) {
      const Real* row = logits + (i - start) * cfg.K;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cfg.K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
      double z = 0;
      for (std::size_t k = 0; k < cfg.K; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
      auto& acc = scores[i / options.samples];
      for (std::size_t k = 0; k < cfg.K; ++k) {
        acc[k] += std::exp(static_cast<double>(row[k]) - mx) / z / static_cast<double>(options.samples);
      }
    }
  }
  return scores;
}

template <typename Real>
EvalReport evaluate(Model<Real>& model, const DatasetManifest& manifest, const EvalOptions& options) {
  if (!model.initialized()) throw StateError("evaluate: model is not initialized");
  const ModelConfig& cfg = model.config();
  check_model_for(cfg, manifest, "evaluate");
  const auto sequences = manifest.with_split(options.split);
  if (sequences.empty()) {
    throw DataError("evaluate: dataset has no '" + std::string(split_name(options.split)) + "' sequences");
  }
  const auto scores = sequence_scores(model, sequences, options);

  // Person tracks of one recording are scored together.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(sequences[i]->source());
    if (fresh) order.push_back(sequences[i]->source());
    it->second.push_back(i);
  }

  EvalReport r;
  r.samples = options.samples;
  r.seed = options.seed;
  r.confusion.assign(cfg.K, std::vector<std::size_t>(cfg.K, 0));
  std::size_t right = 0;
  for (const std::string& src : order) {
    const auto& members = groups[src];
    const int label = sequences[members[0]]->label;
    std::vector<double> mean(cfg.K, 0.0);
    for (std::size_t i : members) {
      if (sequences[i]->label != label) {
        throw DataError("evaluate: tracks of '" + src + "' carry different labels");
      }
      for (std::size_t k = 0; k < cfg.K; ++k) mean[k] += scores[i][k] / static_cast<double>(members.size());
    }
    const std::size_t pred = argmax(mean);
    ++r.confusion[static_cast<std::size_t>(label)][pred];
    right += pred == static_cast<std::size_t>(label);
    ++r.total;
  }
  r.accuracy = static_cast<double>(right) / static_cast<double>(r.total);
  r.per_class_accuracy.assign(cfg.K, kNaN);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    std::size_t n = 0;
    for (std::size_t v : r.confusion[k]) n += v;
    if (n > 0) r.per_class_accuracy[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(n);
  }
  return r;
}

// ------------------------------------------------------------------ ablations

std::vector<std::string> ablation_suite_presets(const std::string& suite) {
  if (suite == "table1") {
    return {"no-semantics", "g-jt", "p-jt", "g-jt-p-jt", "no-tconv-no-fi", "no-tconv-fi", "tconv-no-fi", "sgn"};
  }
  if (suite == "table2") return {"g-gcn", "sgn-no-smp", "sgn"};
  if (suite == "table3") return {"baseline", "baseline-da", "baseline-da-vel", "baseline-da-vel-max"};
  if (suite == "probes") return {"probe-none", "probe-jt", "probe-fi"};
  throw ConfigError("unknown ablation suite '" + suite + "' (known: table1, table2, table3, probes)");
}

double reference_parameter_millions(const std::string& preset) {
  static const std::map<std::string, double> table{
      {"no-semantics", 0.62}, {"g-jt", 0.66},        {"p-jt", 0.64},           {"g-jt-p-jt", 0.67},
      {"no-tconv-no-fi", 0.54}, {"no-tconv-fi", 0.56}, {"tconv-no-fi", 0.67},  {"sgn", 0.69},
      {"g-gcn", 0.68},        {"sgn-no-smp", 0.69},  {"baseline", 0.61},       {"baseline-da", 0.61},
      {"baseline-da-vel", 0.62}, {"baseline-da-vel-max", 0.62}};
  const auto it = table.find(preset);
  return it == table.end() ? kNaN : it->second;
}

AblationReport run_ablation_suite(const std::string& suite, const AblationOptions& options) {
  AblationReport report;
  report.suite = suite;
  report.J = options.J;
  report.T = options.T;
  report.K = options.K;
  for (const std::string& name : ablation_suite_presets(suite)) {
    try {
      AblationRow row;
      row.preset = name;
      const ModelConfig cfg = model_preset(name, options.J, options.T, options.K);
      row.parameters = count_parameters(cfg);
      row.reference_millions = reference_parameter_millions(name);
      row.count_matches = std::isnan(row.reference_millions) ||
                          std::abs(static_cast<double>(row.parameters) / 1e6 - row.reference_millions) <=
                              kParameterToleranceMillions;
      row.accuracy = kNaN;
      if (options.data) {
        const ModelConfig run_cfg = shrink_widths(cfg, options.width_divisor);
        Model<float> model(run_cfg, options.seed);
        TrainRecipe recipe = options.recipe;
        recipe.seed = options.seed;
        train(model, *options.data, recipe);
        row.accuracy = evaluate(model, *options.data, options.eval).accuracy;
      }
      report.rows.push_back(row);
    } catch (const Error& e) {
      throw ConfigError("ablation preset '" + name + "': " + e.what());
    }
  }
  return report;
}

namespace {

std::string format_accuracy(double a) {
  if (std::isnan(a)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * a;
  return s.str();
}

std::string format_millions(double m) {
  if (std::isnan(m)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << m;
  return s.str();
}

}  // namespace

void write_ablation_markdown(std::ostream& out, const AblationReport& r) {
  out << "## " << r.suite << " (J=" << r.J << ", T=" << r.T << ", K=" << r.K << ")\n\n";
  out << "| preset | params | params (M) | reference (M) | count ok | accuracy (%) |\n";
  out << "|---|---:|---:|---:|:---:|---:|\n";
  for (const AblationRow& row : r.rows) {
    out << "| " << row.preset << " | " << row.parameters << " | "
        << format_millions(static_cast<double>(row.parameters) / 1e6) << " | "
        << format_millions(row.reference_millions) << " | " << (row.count_matches ? "yes" : "NO") << " | "
        << format_accuracy(row.accuracy) << " |\n";
  }
}

void write_ablation_csv(std::ostream& out, const AblationReport& r) {
  out << "suite,preset,parameters,reference_millions,count_matches,accuracy\n";
  for (const AblationRow& row : r.rows) {
    out << r.suite << ',' << row.preset << ',' << row.parameters << ',';
    if (std::isnan(row.reference_millions)) {
      out << "";
    } else {
      out << row.reference_millions;
    }
    out << ',' << (row.count_matches ? "true" : "false") << ',';
    if (!std::isnan(row.accuracy)) out << std::setprecision(6) << row.accuracy;
    out << '\n';
  }
}

// ------------------------------------------------------------------ SMP report

template <typename Real>
std::vector<SmpRow> smp_report(Model<Real>& model, const DatasetManifest& manifest, std::size_t top_k,
                               std::uint64_t seed, std::optional<Split> split, std::size_t reference_joint) {
  if (!model.initialized()) throw StateError("smp report: model is not initialized");
  const ModelConfig& cfg = model.config();
  if (cfg.spatial_pool != SpatialPool::max) {
    throw ConfigError("smp report: model '" + cfg.name + "' has no spatial max-pooling");
  }
  if (top_k == 0) throw ConfigError("smp report: top must be positive");
  check_model_for(cfg, manifest, "smp report");
  std::vector<const SkeletonSequence*> sequences;
  if (split) {
    sequences = manifest.with_split(*split);
  } else {
    for (const auto& s : manifest.sequences) sequences.push_back(&s);
  }
  TrainRecipe prep;
  prep.reference_joint = reference_joint;
  std::vector<SmpRow> rows;
  const std::size_t per_sequence = cfg.T * cfg.C3;
  for (const SkeletonSequence* s : sequences) {
    std::mt19937_64 rng = derived_rng(seed, s->id);
    const std::vector<SkeletonSequence> one{preprocess(*s, cfg.T, rng, false, prep)};
    Tape<Real> tape(false);
    const auto out = model.forward(tape, stack_batch<Real>(one), false);
    const auto counts = count_selections(std::span<const std::size_t>(out.smp_trace).first(per_sequence), cfg.J);
    for (std::size_t i = 0; i < std::min(top_k, counts.size()); ++i) {
      rows.push_back({s->id, i + 1, counts[i].joint, counts[i].count});
    }
  }
  return rows;
}

void write_smp_csv(std::ostream& out, std::span<const SmpRow> rows) {
  out << "sequence_id,rank,joint,count\n";
  for (const SmpRow& r : rows) out << r.sequence_id << ',' << r.rank << ',' << r.joint << ',' << r.count << '\n';
}

// ------------------------------------------------------------------ gradcheck

ModelConfig small_gradcheck_config(const std::string& preset) {
  return shrink_widths(model_preset(preset, 4, 5, 3), 8);
}

GradcheckResult model_gradcheck(const ModelConfig& cfg, const ModelGradcheckOptions& options) {
  Model<double> model(cfg, options.seed);
  std::mt19937_64 rng = derived_rng(options.seed, "gradcheck-input");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<double> positions({options.batch, cfg.T, cfg.J, 3});
  for (double& v : positions.storage()) v = u(rng);
  std::vector<int> labels(options.batch);
  for (std::size_t b = 0; b < options.batch; ++b) labels[b] = static_cast<int>(b % cfg.K);
  // Shift BN shifts and biases off zero so that relu units are not pinned at a kink.
  for (auto& t : model.tensors()) {
    if (t.role == TensorRole::bias || t.role == TensorRole::bn_shift) {
      for (double& v : t.value.storage()) v = 0.1 * u(rng);
    }
  }
  std::vector<Tensor<double>*> params = model.trainable();
  auto loss = [&](Tape<double>& tape) {
    const auto out = model.forward(tape, positions, true);
    return smoothed_cross_entropy(out.logits, labels, 0.1);
  };
  GradcheckOptions gc;
  gc.epsilon = options.epsilon;
  gc.max_coordinates = options.coordinates;
  gc.seed = options.seed;
  gc.relative_floor = options.relative_floor;
  return gradcheck(loss, params, gc);
}

#define SGN_INSTANTIATE_EVAL(R)                                                                        \
  template EvalReport evaluate<R>(Model<R>&, const DatasetManifest&, const EvalOptions&);              \
  template std::vector<std::vector<double>> sequence_scores<R>(                                        \
      Model<R>&, std::span<const SkeletonSequence* const>, const EvalOptions&);                        \
  template std::vector<SmpRow> smp_report<R>(Model<R>&, const DatasetManifest&, std::size_t, std::uint64_t, \
                                             std::optional<Split>, std::size_t);

SGN_INSTANTIATE_EVAL(float)
SGN_INSTANTIATE_EVAL(double)

}  // namespace sgn
