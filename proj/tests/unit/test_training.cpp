// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "sgn/errors.hpp"
#include "sgn/eval.hpp"
#include "sgn/training.hpp"
#include "test_util.hpp"

namespace {

using namespace sgn;
using sgn::testing::random_tensor;
using T = Tensor<double>;

double loss_of(const T& logits, const std::vector<int>& labels, double eps) {
  Tape<double> tape(false);
  return smoothed_cross_entropy(tape.constant(logits), labels, eps).value().item();
}

// ----------------------------------------------------------------- loss

TEST(SmoothedCrossEntropy, UniformLogitsGiveLogK) {
  for (double eps : {0.0, 0.1, 0.5}) {
    EXPECT_NEAR(loss_of(T({3, 60}), {0, 17, 59}, eps), std::log(60.0), 1e-12);
  }
}

TEST(SmoothedCrossEntropy, ConfidentCorrectLogitsGiveZeroWithoutSmoothing) {
  T logits({2, 3}, {200, -200, -200, -200, -200, 200});
  EXPECT_NEAR(loss_of(logits, {0, 2}, 0.0), 0.0, 1e-12);
}

TEST(SmoothedCrossEntropy, GradientEncodesTargetWeights) {
  // At zero logits the gradient is (1/K − q)/B.
  T zero({1, 60});
  zero.set_requires_grad(true);
  Tape<double> tape;
  const std::vector<int> y{5};
  tape.backward(smoothed_cross_entropy(tape.parameter(zero), y, 0.1));
  EXPECT_NEAR(zero.grad()[5], 1.0 / 60 - (0.9 + 0.1 / 60), 1e-15);
  EXPECT_NEAR(zero.grad()[0], 1.0 / 60 - 0.1 / 60, 1e-15);
}

TEST(SmoothedCrossEntropy, BoundedBelowByTargetEntropy) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 2 + trial % 7;
    const double eps = 0.05 * (trial % 5);
    const T logits = random_tensor({1, K}, rng, -4, 4);
    const int y = static_cast<int>(rng() % K);
    double h = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const double q = (static_cast<int>(k) == y ? 1 - eps : 0) + eps / static_cast<double>(K);
      if (q > 0) h -= q * std::log(q);
    }
    EXPECT_GE(loss_of(logits, {y}, eps), h - 1e-9);
  }
  // Equality when softmax(logits) == q.
  const double eps = 0.2;
  const std::size_t K = 4;
  T logits({1, K});
  for (std::size_t k = 0; k < K; ++k) logits[k] = std::log((k == 1 ? 1 - eps : 0) + eps / K);
  double h = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double q = (k == 1 ? 1 - eps : 0) + eps / K;
    h -= q * std::log(q);
  }
  EXPECT_NEAR(loss_of(logits, {1}, eps), h, 1e-12);
}

TEST(SmoothedCrossEntropy, Errors) {
  EXPECT_THROW(loss_of(T({2, 3}), {0, 3}, 0.1), DataError);
  EXPECT_THROW(loss_of(T({2, 3}), {0, -1}, 0.1), DataError);
  EXPECT_THROW(loss_of(T({2, 3}), {0}, 0.1), DimensionError);
  EXPECT_THROW(loss_of(T({2, 3}), {0, 1}, 1.0), ConfigError);
}

TEST(SmoothedCrossEntropy, Gradcheck) {
  std::mt19937_64 rng(2);
  T logits = random_tensor({4, 5}, rng, -3, 3);
  const std::vector<int> y{0, 4, 2, 2};
  std::vector<T*> params{&logits};
  auto loss = [&](Tape<double>& tape) { return smoothed_cross_entropy(tape.parameter(logits), y, 0.1); };
  EXPECT_LT(gradcheck(loss, params).max_relative_error, 1e-6);
}

// ----------------------------------------------------------------- schedule

TEST(Schedule, MilestoneDecay) {
  const TrainRecipe r = TrainRecipe::full();
  EXPECT_DOUBLE_EQ(lr_at_epoch(r, 0), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at_epoch(r, 59), 1e-3);
  EXPECT_NEAR(lr_at_epoch(r, 60), 1e-4, 1e-18);
  EXPECT_NEAR(lr_at_epoch(r, 95), 1e-5, 1e-18);
  EXPECT_NEAR(lr_at_epoch(r, 110), 1e-6, 1e-18);
  EXPECT_THROW(lr_at_epoch(r, 120), ContractError);
  for (std::size_t e = 1; e < r.epochs; ++e) EXPECT_LE(lr_at_epoch(r, e), lr_at_epoch(r, e - 1));
}

TEST(Recipe, ValidationAndJson) {
  TrainRecipe r;
  r.milestones = {60, 50};
  EXPECT_THROW(r.validate(), ConfigError);
  r = TrainRecipe::desk();
  r.milestones = {20, 40};
  EXPECT_THROW(r.validate(), ConfigError);
  r = TrainRecipe::desk();
  r.label_smoothing = 1.0;
  EXPECT_THROW(r.validate(), ConfigError);
  r = TrainRecipe::desk();
  r.seed = 77;
  r.rotation_degrees = {10, 20, 30};
  const TrainRecipe back = train_recipe_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.epochs, 40u);
  EXPECT_EQ(back.milestones, r.milestones);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.rotation_degrees, r.rotation_degrees);
  const TrainRecipe desk = train_recipe_from_json(nlohmann::json::parse(R"({"schedule": "desk", "epochs": 50})"));
  EXPECT_EQ(desk.batch_size, 16u);
  EXPECT_EQ(desk.epochs, 50u);
  EXPECT_THROW(train_recipe_from_json(nlohmann::json::parse(R"({"epochs": "x"})")), ConfigError);
}

// ----------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientIsFixedPoint) {
  T p({3}, {1, -2, 3});
  p.set_requires_grad(true);
  std::vector<T*> params{&p};
  const bool decay[] = {true};
  AdamState<double> st;
  for (int i = 0; i < 5; ++i) adam_step<double>(params, decay, st, 0.1, 0.0);
  EXPECT_TRUE(p.identical(T({3}, {1, -2, 3})));
  EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepMagnitude) {
  T p({2}, {0.5, 0.5});
  p.grad()[0] = 3.0;
  p.grad()[1] = -0.02;
  std::vector<T*> params{&p};
  const bool decay[] = {false};
  AdamState<double> st;
  adam_step<double>(params, decay, st, 0.01, 0.0);
  EXPECT_NEAR(p[0], 0.5 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], 0.5 + 0.01 * 0.02 / (0.02 + 1e-8), 1e-15);
}

TEST(Adam, ConvergesOnQuadratic) {
  T p({1}, {1.0});
  std::vector<T*> params{&p};
  const bool decay[] = {false};
  AdamState<double> st;
  for (int i = 0; i < 500; ++i) {
    p.grad()[0] = 2 * p[0];
    adam_step<double>(params, decay, st, 0.01, 0.0);
  }
  EXPECT_LT(std::abs(p[0]), 1e-3);
}

TEST(Adam, WeightDecayOnlyWhereFlagged) {
  T a({1}, {2.0}), b({1}, {2.0});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  std::vector<T*> params{&a, &b};
  const bool decay[] = {true, false};
  AdamState<double> st;
  adam_step<double>(params, decay, st, 0.1, 1e-4);
  EXPECT_LT(a[0], 2.0);
  EXPECT_EQ(b[0], 2.0);
}

TEST(Adam, MismatchedStateThrows) {
  T a({2}), b({3});
  std::vector<T*> one{&a}, other{&b};
  const bool decay[] = {false};
  AdamState<double> st;
  adam_step<double>(one, decay, st, 0.1, 0.0);
  EXPECT_THROW(adam_step<double>(other, decay, st, 0.1, 0.0), DimensionError);
  const bool two[] = {false, false};
  EXPECT_THROW(adam_step<double>(one, two, st, 0.1, 0.0), DimensionError);
}

// ----------------------------------------------------------------- data plumbing

DatasetManifest toy_set(std::size_t per_class, double test_fraction, std::uint64_t seed = 3) {
  SyntheticConfig sc;
  sc.K = 4;
  sc.per_class = per_class;
  sc.test_fraction = test_fraction;
  sc.frames = 24;
  sc.seed = seed;
  return generate_synthetic(sc);
}

TEST(Preprocess, ShapesAndReferenceJoint) {
  const DatasetManifest d = toy_set(2, 0.0);
  TrainRecipe r;
  std::mt19937_64 rng(1);
  const SkeletonSequence s = preprocess(d.sequences[0], 20, rng, true, r);
  EXPECT_EQ(s.length(), 20u);
  EXPECT_EQ(s.joints(), 15u);
  // The reference joint of the first frame becomes the origin.
  for (double v : s.frames[0][0]) EXPECT_NEAR(v, 0.0, 1e-12);
  const std::vector<SkeletonSequence> batch{s, s};
  EXPECT_EQ(stack_batch<float>(batch).shape(), (Shape{2, 20, 15, 3}));
}

TEST(SplitTrainVal, SeededDisjointShare) {
  const DatasetManifest d = toy_set(10, 0.0);
  TrainRecipe r;
  r.seed = 4;
  const auto a = split_train_val(d, r), b = split_train_val(d, r);
  EXPECT_EQ(a.val.size(), 4u);
  EXPECT_EQ(a.train.size(), 36u);
  EXPECT_EQ(a.val, b.val);
  std::set<const SkeletonSequence*> seen(a.train.begin(), a.train.end());
  for (const auto* s : a.val) EXPECT_FALSE(seen.count(s));
  r.val_fraction = 0;
  EXPECT_TRUE(split_train_val(d, r).val.empty());
}

TEST(SplitTrainVal, TracksOfOneSourceStayTogether) {
  DatasetManifest d = toy_set(5, 0.0);
  for (std::size_t i = 0; i < d.sequences.size(); ++i) d.sequences[i].source_id = "src" + std::to_string(i / 2);
  TrainRecipe r;
  r.val_fraction = 0.3;
  const auto s = split_train_val(d, r);
  std::set<std::string> val_sources;
  for (const auto* q : s.val) val_sources.insert(q->source());
  for (const auto* q : s.train) EXPECT_FALSE(val_sources.count(q->source())) << q->id;
}

TEST(TrainLog, CsvColumns) {
  std::ostringstream out;
  write_train_log_header(out);
  write_train_log_row(out, {3, 1e-3, 0.5, 0.75, std::nan(""), 1.5});
  EXPECT_EQ(out.str(), "epoch,lr,train_loss,train_acc,val_acc,wall_seconds\n3,0.001,0.5,0.75,nan,1.5\n");
}

// ----------------------------------------------------------------- training loop

ModelConfig toy_model(const std::string& preset = "sgn") {
  return shrink_widths(model_preset(preset, 15, 20, 4), 8);
}

TrainRecipe toy_recipe(std::size_t epochs) {
  TrainRecipe r;
  r.epochs = epochs;
  r.milestones = {};
  r.batch_size = 8;
  r.seed = 11;
  return r;
}

TEST(Train, ReproducibleCheckpoints) {
  const DatasetManifest d = toy_set(4, 0.25);
  auto run = [&] {
    Model<float> m(toy_model(), 1);
    const auto log = train(m, d, toy_recipe(3));
    return std::pair(model_checksum(m), log.front().train_loss);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  Model<float> m(toy_model(), 1);
  TrainRecipe other = toy_recipe(3);
  other.seed = 12;
  train(m, d, other);
  EXPECT_NE(model_checksum(m), a.first);
}

TEST(Train, LogsEveryEpochAndAdvancesStep) {
  const DatasetManifest d = toy_set(4, 0.25);
  Model<float> m(toy_model(), 1);
  std::vector<std::size_t> seen;
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochLog& e) { seen.push_back(e.epoch); };
  TrainRecipe r = toy_recipe(4);
  r.milestones = {2};
  const auto log = train(m, d, r, cb);
  ASSERT_EQ(log.size(), 4u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(log[2].lr, 1e-4);
  // 12 train sequences, 10% held out → 11 train (rounded), batch 8 → 2 steps per epoch.
  EXPECT_EQ(m.step(), 8u);
  for (const auto& e : log) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    EXPECT_GE(e.wall_seconds, 0.0);
    EXPECT_FALSE(std::isnan(e.val_acc));
  }
}

TEST(Train, Errors) {
  DatasetManifest d = toy_set(4, 0.25);
  Model<float> wrong_j(shrink_widths(model_preset("sgn", 16, 20, 4), 8), 1);
  EXPECT_THROW(train(wrong_j, d, toy_recipe(1)), SchemaError);
  DatasetManifest none = d;
  for (auto& s : none.sequences) s.split = Split::test;
  Model<float> m(toy_model(), 1);
  EXPECT_THROW(train(m, none, toy_recipe(1)), DataError);
  m.tensor("classifier.bias")[0] = std::nanf("");
  EXPECT_THROW(train(m, d, toy_recipe(1)), NumericError);
}

TEST(Train, SmallStepDecreasesLossOnFrozenBatch) {
  const DatasetManifest d = toy_set(2, 0.0);
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Model<double> m(toy_model("probe-jt"), trial);
    TrainRecipe r;
    std::vector<SkeletonSequence> batch;
    std::vector<int> labels;
    for (const auto& s : d.sequences) {
      std::mt19937_64 rng(trial);
      batch.push_back(preprocess(s, 20, rng, false, r));
      labels.push_back(s.label);
    }
    const T x = stack_batch<double>(batch);
    // Eval-mode BN keeps the objective a fixed function of the parameters.
    auto loss_now = [&] {
      Tape<double> tape;
      const auto out = m.forward(tape, x, false);
      auto l = smoothed_cross_entropy(out.logits, labels, 0.1);
      return std::pair(l.value().item(), 0);
    };
    auto params = m.trainable();
    for (T* p : params) {
      p->set_requires_grad(true);
      p->zero_grad();
    }
    double before;
    {
      Tape<double> tape;
      const auto out = m.forward(tape, x, false);
      auto l = smoothed_cross_entropy(out.logits, labels, 0.1);
      before = l.value().item();
      tape.backward(l);
    }
    std::vector<char> flags(params.size(), 0);
    std::unique_ptr<bool[]> decay(new bool[params.size()]());
    AdamState<double> st;
    adam_step<double>(params, std::span<const bool>(decay.get(), params.size()), st, 1e-5, 0.0);
    EXPECT_LT(loss_now().first, before) << "trial " << trial;
  }
}

TEST(Train, OverfitsEightSequences) {
  const DatasetManifest d = toy_set(2, 0.0);
  ASSERT_EQ(d.with_split(Split::train).size(), 8u);
  Model<float> m(toy_model(), 2);
  TrainRecipe r = toy_recipe(200);
  r.val_fraction = 0;
  train(m, d, r);
  EvalOptions eo;
  eo.split = Split::train;
  eo.samples = 1;
  EXPECT_EQ(evaluate(m, d, eo).accuracy, 1.0);
}

// ----------------------------------------------------------------- evaluation

TEST(Evaluate, AccountingIdentityAndDeterminism) {
  const DatasetManifest d = toy_set(4, 0.5);
  Model<float> m(toy_model(), 3);
  EvalOptions eo;
  eo.samples = 1;
  eo.seed = 9;
  const EvalReport a = evaluate(m, d, eo), b = evaluate(m, d, eo);
  EXPECT_EQ(a.confusion, b.confusion);
  std::size_t trace = 0, total = 0;
  for (std::size_t k = 0; k < a.confusion.size(); ++k) {
    trace += a.confusion[k][k];
    for (std::size_t v : a.confusion[k]) total += v;
  }
  EXPECT_EQ(total, a.total);
  EXPECT_EQ(total, d.with_split(Split::test).size());
  EXPECT_DOUBLE_EQ(a.accuracy, static_cast<double>(trace) / static_cast<double>(total));
}

TEST(Evaluate, ZeroClassifierPredictsBiasArgmax) {
  const DatasetManifest d = toy_set(4, 0.5);
  Model<float> m(toy_model(), 3);
  auto& w = m.tensor("classifier.weight");
  std::fill(w.storage().begin(), w.storage().end(), 0.0f);
  auto& b = m.tensor("classifier.bias");
  b[2] = 1.0f;
  const EvalReport r = evaluate(m, d);
  std::size_t class2 = 0;
  for (const auto* s : d.with_split(Split::test)) class2 += s->label == 2;
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(class2) / static_cast<double>(r.total));
  for (const auto& row : r.confusion) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k != 2) EXPECT_EQ(row[k], 0u);
    }
  }
}

TEST(Evaluate, TracksOfOneSourceAreOneItem) {
  DatasetManifest d = toy_set(4, 0.5);
  for (auto& s : d.sequences) s.source_id = "rec-" + std::to_string(s.label) + "-" + std::to_string(s.split == Split::test);
  Model<float> m(toy_model(), 3);
  const EvalReport r = evaluate(m, d);
  EXPECT_EQ(r.total, 4u);
  d.sequences[0].label = (d.sequences[0].label + 1) % 4;
  d.sequences[0].source_id = d.sequences[1].source_id;
  d.sequences[0].split = d.sequences[1].split = Split::test;
  EXPECT_THROW(evaluate(m, d), DataError);
}

TEST(Evaluate, EmptySplitIsDataError) {
  DatasetManifest d = toy_set(4, 0.0);
  Model<float> m(toy_model(), 3);
  EXPECT_THROW(evaluate(m, d), DataError);
}

TEST(SmpReport, CountsConserveAndRankDescending) {
  const DatasetManifest d = toy_set(2, 0.5);
  const ModelConfig c = toy_model();
  Model<float> m(c, 3);
  const auto rows = smp_report(m, d, c.J, 1);
  std::map<std::string, std::size_t> totals;
  std::map<std::string, std::size_t> last;
  for (const auto& r : rows) {
    totals[r.sequence_id] += r.count;
    if (r.rank > 1) EXPECT_LE(r.count, last[r.sequence_id]);
    last[r.sequence_id] = r.count;
  }
  EXPECT_EQ(totals.size(), d.sequences.size());
  for (const auto& [id, n] : totals) EXPECT_EQ(n, c.T * c.C3) << id;
  const auto top = smp_report(m, d, 5, 1, Split::test);
  EXPECT_EQ(top.size(), 5 * d.with_split(Split::test).size());
  Model<float> avg(toy_model("baseline"), 1);
  EXPECT_THROW(smp_report(avg, d, 5, 1), ConfigError);
  Model<float> empty;
  EXPECT_THROW(smp_report(empty, d, 5, 1), StateError);
}

// ----------------------------------------------------------------- ablation harness

TEST(Ablation, CountsOnlySuites) {
  AblationOptions o;
  const AblationReport t1 = run_ablation_suite("table1", o);
  ASSERT_EQ(t1.rows.size(), 8u);
  for (const auto& row : t1.rows) {
    EXPECT_TRUE(row.count_matches) << row.preset;
    EXPECT_TRUE(std::isnan(row.accuracy));
  }
  EXPECT_EQ(run_ablation_suite("table2", o).rows.size(), 3u);
  EXPECT_EQ(run_ablation_suite("table3", o).rows.size(), 4u);
  EXPECT_THROW(run_ablation_suite("table9", o), ConfigError);
  std::ostringstream md, csv;
  write_ablation_markdown(md, t1);
  write_ablation_csv(csv, t1);
  EXPECT_NE(md.str().find("| sgn | 689340 | 0.69 | 0.69 | yes | - |"), std::string::npos) << md.str();
  EXPECT_NE(csv.str().find("table1,sgn,689340,0.69,true,\n"), std::string::npos) << csv.str();
}

TEST(Ablation, CountsIgnoreDataContent) {
  const DatasetManifest d = toy_set(2, 0.5);
  AblationOptions o;
  o.J = 15;
  o.T = 20;
  o.K = 4;
  const auto bare = run_ablation_suite("table2", o);
  o.data = &d;
  o.width_divisor = 16;
  o.recipe = toy_recipe(1);
  o.eval.samples = 1;
  const auto trained = run_ablation_suite("table2", o);
  for (std::size_t i = 0; i < bare.rows.size(); ++i) {
    EXPECT_EQ(bare.rows[i].parameters, trained.rows[i].parameters);
    EXPECT_FALSE(std::isnan(trained.rows[i].accuracy));
  }
}

}  // namespace
