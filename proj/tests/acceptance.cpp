// Acceptance harness: evaluates each acceptance criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion.
//
// The exit status reports whether every criterion could be evaluated. A
// criterion that runs but misses its threshold prints FAIL and is listed in
// the summary; --strict turns any FAIL into a non-zero exit as well.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "l2l/commands.hpp"
#include "l2l/dataset.hpp"
#include "l2l/metrics.hpp"
#include "l2l/model.hpp"
#include "l2l/objectives.hpp"
#include "oracles.hpp"

using namespace l2l;
namespace fs = std::filesystem;
using l2l::test::copy_rows_permuted;
using l2l::test::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Harness {
  fs::path work;
  std::string cli;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1. gradient soundness ----------------------------------------------------

Outcome gradient_soundness(const Harness&) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc;
  mc.mode = Mode::Label2Label;
  mc.num_attributes = 3;
  mc.image_size = 8;
  mc.conv1_channels = 3;
  mc.conv2_channels = 4;
  mc.d = 8;
  mc.heads = 2;
  mc.ffn_hidden = 16;
  mc.aqn_layers = 1;
  mc.mlm_layers = 1;
  const Label2LabelModel model = Label2LabelModel::create(mc);

  Rng rng(101);
  const Tensor images = random_tensor({2, 8, 8, 1}, rng, false, 0, 1);
  // Fixed masked sentences keep the graph identical across probes; the
  // thresholded readout is not differentiable.
  const std::vector<MaskedSentence> sentences{{{Word::One, Word::Mask, Word::Zero}, {1}},
                                              {{Word::Mask, Word::Zero, Word::One}, {0}}};
  const std::vector<std::uint8_t> labels{1, 0, 0, 1, 0, 1};
  const WeightScheme scheme = WeightScheme::exponential({0.3, 0.5, 0.7});
  ForwardOptions fo;
  fo.sentences = &sentences;
  const auto loss = [&] {
    const ForwardPass pass = model.forward(images, fo);
    return total_loss(pass.aqn.probs, pass.mlm->probs, labels, 1.0, scheme, 3).total;
  };
  const auto params = tensors_of(model.params());
  std::size_t coords = 0;
  for (const auto& p : params) coords += p.numel();
  const double err = check_grad_params(loss, params, 1e-5);
  const double secs = seconds_since(t0);
  return {err < 1e-4 && secs < 60.0,
          fmt("max relative error %.3g over %zu coordinates in %zu tensors (< 1e-4), %.1f s (< 60 s)", err, coords,
              params.size(), secs)};
}

// ---- 2. metric oracle equivalence ---------------------------------------------------

BinaryMatrix to_binary(const oracle::Matrix& m) {
  BinaryMatrix out;
  out.rows = m.size();
  out.cols = m[0].size();
  for (const auto& row : m)
    for (int v : row) out.values.push_back(static_cast<std::uint8_t>(v));
  return out;
}

Outcome metric_equivalence(const Harness&) {
  const auto t0 = std::chrono::steady_clock::now();
  const oracle::Matrix hand_pred{{1, 0}, {1, 1}, {0, 0}, {0, 1}};
  const oracle::Matrix hand_label{{1, 0}, {0, 1}, {0, 0}, {1, 1}};
  const double hand = compute_mA(to_binary(hand_pred), to_binary(hand_label));
  std::size_t mismatches = 0, degenerate = 0;
  Rng rng(202);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(32), m = 1 + rng.index(8);
    oracle::Matrix pred(n, std::vector<int>(m)), label(n, std::vector<int>(m));
    const double pl = rng.uniform(0.05, 0.95), pp = rng.uniform(0.05, 0.95);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        label[i][j] = rng.bernoulli(pl);
        pred[i][j] = rng.bernoulli(pp);
      }
    const BinaryMatrix bp = to_binary(pred), bl = to_binary(label);

    bool is_degenerate = false;
    for (std::size_t j = 0; j < m; ++j) {
      int pos = 0;
      for (std::size_t i = 0; i < n; ++i) pos += label[i][j];
      if (pos == 0 || pos == static_cast<int>(n)) is_degenerate = true;
    }
    if (is_degenerate) {
      ++degenerate;
      try {
        compute_mA(bp, bl);
        ++mismatches;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateAttribute) ++mismatches;
      }
    } else if (compute_mA(bp, bl) != oracle::mean_accuracy(pred, label)) {
      ++mismatches;
    }
    const InstanceMetrics im = compute_instance_metrics(bp, bl);
    const oracle::Instance ref = oracle::instance_metrics(pred, label);
    if (im.accuracy != ref.accuracy || im.precision != ref.precision || im.recall != ref.recall || im.f1 != ref.f1)
      ++mismatches;
    if (per_attribute_error(bp, bl).per_attribute != oracle::attribute_error(pred, label)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && hand == 0.75 && secs < 10.0,
          fmt("%zu mismatches in 1000 instances (%zu with a degenerate column), hand case mA = %.17g, %.2f s",
              mismatches, degenerate, hand, secs)};
}

// ---- 3. loss formula fidelity ----------------------------------------------------------

Outcome loss_fidelity(const Harness&) {
  Rng rng(303);
  double worst_loss = 0, worst_weight = 0;
  for (int t = 0; t < 100; ++t) {
    const int y = rng.bernoulli(0.5);
    const double p = rng.uniform(1e-6, 1 - 1e-6), gamma = rng.uniform();
    const double w_ref = y ? std::exp(1 - gamma) : std::exp(gamma);
    const double w = attribute_weight(gamma, static_cast<std::uint8_t>(y));
    worst_weight = std::max(worst_weight, std::abs(w - w_ref));
    const std::vector<std::uint8_t> yy{static_cast<std::uint8_t>(y)};
    const std::vector<double> ww{w_ref};
    const double direct = -w_ref * (y ? std::log(p) : std::log(1 - p));
    worst_loss = std::max(worst_loss, std::abs(bce_loss(Tensor::from({1}, {p}), yy, ww).item() - direct));
  }
  const std::vector<std::uint8_t> one{1};
  const std::vector<double> unit{1.0};
  const double ln2 = bce_loss(Tensor::from({1}, {0.5}), one, unit).item();
  const double e_half = attribute_weight(0.5, 1);
  const double analytic = std::max(std::abs(ln2 - std::log(2.0)), std::abs(e_half - std::exp(0.5)));
  const bool pass = worst_loss <= 1e-12 && worst_weight <= 1e-12 && analytic <= 1e-12;
  return {pass, fmt("max |loss - direct| %.3g, max |w - direct| %.3g, analytic points off by %.3g (<= 1e-12)",
                    worst_loss, worst_weight, analytic)};
}

// ---- 4. permutation properties ------------------------------------------------------------

FeatureMap features_for(Rng& rng, std::size_t batch, bool pos) {
  const Backbone bb =
      Backbone::create({.image_size = 8, .conv1_channels = 3, .conv2_channels = 4, .d = 8, .pos_embedding = pos}, rng);
  return bb.extract(random_tensor({batch, 8, 8, 1}, rng, false, 0, 1));
}

double icmlm_equivariance(Rng& rng) {
  const std::size_t m = 5;
  const IcmlmConfig cfg{.num_attributes = m, .layers = 2, .decoder = {.d = 8, .heads = 2, .ffn_hidden = 16}};
  const std::uint64_t seed = rng.next_u64();
  Rng ia(seed), ib(seed);
  const Icmlm a = Icmlm::create(cfg, ia);
  Icmlm b = Icmlm::create(cfg, ib);
  const auto perm = l2l::test::random_permutation(m, rng);
  std::vector<std::size_t> word_rows(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    word_rows[2 * i] = 2 * perm[i];
    word_rows[2 * i + 1] = 2 * perm[i] + 1;
  }
  copy_rows_permuted(a.vocab.table, b.vocab.table, word_rows);
  copy_rows_permuted(a.vocab.table, b.vocab.table, perm, 2 * m);
  copy_rows_permuted(a.classifier_weight, b.classifier_weight, perm);
  copy_rows_permuted(a.classifier_bias, b.classifier_bias, perm);
  const FeatureMap f = features_for(rng, 2, true);
  std::vector<MaskedSentence> sa, sb;
  for (int n = 0; n < 2; ++n) {
    std::vector<std::uint8_t> bits(m);
    for (auto& v : bits) v = static_cast<std::uint8_t>(rng.bernoulli(0.5));
    const MaskedSentence ms = mask_sentence(bits, 0.3, rng);
    MaskedSentence pm;
    for (std::size_t i = 0; i < m; ++i) pm.words.push_back(ms.words[perm[i]]);
    sa.push_back(ms);
    sb.push_back(pm);
  }
  const IcmlmOutput oa = a.forward(embed_words(sa, a.vocab, cfg.mask_strategy), f);
  const IcmlmOutput ob = b.forward(embed_words(sb, b.vocab, cfg.mask_strategy), f);
  double worst = 0;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < m; ++i) {
      worst = std::max(worst, std::abs(ob.probs.at(n * m + i) - oa.probs.at(n * m + perm[i])));
      for (std::size_t k = 0; k < 8; ++k)
        worst = std::max(worst, std::abs(ob.token_responses.at(n * m + i, k) - oa.token_responses.at(n * m + perm[i], k)));
    }
  return worst;
}

double aqn_equivariance(Rng& rng) {
  const std::size_t m = 5;
  const AqnConfig cfg{.num_attributes = m, .layers = 2, .decoder = {.d = 8, .heads = 2, .ffn_hidden = 16}};
  const std::uint64_t seed = rng.next_u64();
  Rng ia(seed), ib(seed);
  const Aqn a = Aqn::create(cfg, ia);
  Aqn b = Aqn::create(cfg, ib);
  const auto perm = l2l::test::random_permutation(m, rng);
  copy_rows_permuted(a.queries, b.queries, perm);
  copy_rows_permuted(a.classifier_weight, b.classifier_weight, perm);
  copy_rows_permuted(a.classifier_bias, b.classifier_bias, perm);
  const FeatureMap f = features_for(rng, 2, true);
  const AqnOutput oa = a.forward(f), ob = b.forward(f);
  double worst = 0;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(ob.probs.at(n * m + i) - oa.probs.at(n * m + perm[i])));
  return worst;
}

double feature_row_invariance(Rng& rng) {
  const AqnConfig cfg{.num_attributes = 4, .layers = 1, .decoder = {.d = 8, .heads = 2, .ffn_hidden = 16}};
  const Aqn aqn = Aqn::create(cfg, rng);
  const FeatureMap f = features_for(rng, 2, false);
  const std::size_t cells = f.cells();
  FeatureMap g = f;
  std::vector<double> shuffled(f.x_flat.numel());
  for (std::size_t n = 0; n < f.batch; ++n) {
    const auto perm = l2l::test::random_permutation(cells, rng);
    for (std::size_t r = 0; r < cells; ++r)
      for (std::size_t k = 0; k < f.d; ++k)
        shuffled[(n * cells + r) * f.d + k] = f.x_flat.at((n * cells + perm[r]) * f.d + k);
  }
  g.x_flat = Tensor::from(f.x_flat.shape(), shuffled);
  g.x_pos_added = g.x_flat;
  const AqnOutput oa = aqn.forward(f), ob = aqn.forward(g);
  return l2l::test::max_abs_diff(oa.probs.data(), ob.probs.data());
}

Outcome permutation_properties(const Harness&) {
  Rng rng(404);
  double a = 0, b = 0, c = 0;
  for (int t = 0; t < 10; ++t) {
    a = std::max(a, icmlm_equivariance(rng));
    b = std::max(b, aqn_equivariance(rng));
    c = std::max(c, feature_row_invariance(rng));
  }
  return {a < 1e-9 && b < 1e-9 && c < 1e-9,
          fmt("(a) IC-MLM sentence %.3g, (b) AQN query set %.3g, (c) feature rows %.3g over 10 instances each (< 1e-9)",
              a, b, c)};
}

// ---- 5. masking statistics ---------------------------------------------------------------

Outcome masking_statistics(const Harness&) {
  Rng rng(505);
  const std::vector<std::uint8_t> sentence(10, 1);
  std::size_t masked = 0;
  for (int t = 0; t < 10000; ++t) masked += mask_sentence(sentence, 0.1, rng).mask_positions.size();
  const double rate = static_cast<double>(masked) / 1e5;
  return {rate >= 0.097 && rate <= 0.103, fmt("mask rate %.5f over 1e5 draws at alpha = 0.1 (in [0.097, 0.103])", rate)};
}

// ---- 6. synthetic benchmark ----------------------------------------------------------------

RunConfig benchmark_config() {
  RunConfig c;
  c.m = 8;
  c.k = 3;
  c.eps = 0.05;
  c.rho = 0.3;
  c.n_train = 4000;
  c.n_val = 500;
  c.n_test = 1000;
  c.seed = 7;
  c.d = 32;
  c.heads = 4;
  c.ffn_hidden = 64;
  c.aqn_layers = 1;
  c.mlm_layers = 2;
  c.alpha = 0.1;
  c.lambda = 1.0;
  c.epochs = 30;
  c.batch_size = 32;
  c.lr = 0.05;
  c.scheduler = "cosine";
  return c;
}

nlohmann::json train_and_eval(RunConfig c, const fs::path& data, const fs::path& dir, const std::string& mode) {
  c.mode = mode;
  c.data = data.string();
  c.out = (dir / mode / "train").string();
  run_command("train", c);
  c.checkpoint = (dir / mode / "train" / "checkpoint").string();
  c.out = (dir / mode / "eval").string();
  c.split = "test";
  run_command("eval", c);
  return read_json(dir / mode / "eval" / "report.json");
}

Outcome synthetic_benchmark(const Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = h.work / "benchmark";
  const fs::path data = dir / "data";
  RunConfig gen = benchmark_config();
  gen.out = data.string();
  run_command("generate", gen);

  std::map<std::string, nlohmann::json> r;
  for (const char* mode : {"label2label", "aqn_only", "fc_head", "mlm_no_image"})
    r[mode] = train_and_eval(benchmark_config(), data, dir, mode);

  const double pct = 100.0;
  const double oracle = pct * r["label2label"]["oracle"]["mean_error"].get<double>();
  const double l2l = pct * r["label2label"]["model"]["mean_error"].get<double>();
  const double aqn = pct * r["aqn_only"]["model"]["mean_error"].get<double>();
  const double fc = pct * r["fc_head"]["model"]["mean_error"].get<double>();
  const double mlm_occ = pct * r["mlm_no_image"]["occluded"]["model_error"].get<double>();
  const double majority_occ = pct * r["mlm_no_image"]["occluded"]["marginal_majority_error"].get<double>();
  const double secs = seconds_since(t0);

  struct Clause {
    const char* name;
    bool ok;
  };
  const Clause clauses[] = {
      {"oracle <= label2label", oracle <= l2l},
      {"label2label < aqn_only", l2l < aqn},
      {"aqn_only < fc_head", aqn < fc},
      {"label2label >= 1.0 pt below aqn_only", aqn - l2l >= 1.0},
      {"label2label within 3.0 pt of oracle", l2l - oracle <= 3.0},
      {"mlm_no_image does not beat marginal majority on occluded", mlm_occ >= majority_occ},
      {"runtime < 15 min", secs < 900.0},
  };
  bool pass = true;
  std::string failed;
  for (const auto& c : clauses) {
    pass = pass && c.ok;
    if (!c.ok) failed += std::string(failed.empty() ? "" : "; ") + c.name;
  }
  std::string detail = fmt(
      "test mean error %%: oracle %.3f, label2label %.3f (its AQN head %.3f), aqn_only %.3f, fc_head %.3f; "
      "occluded entries: mlm_no_image %.3f vs marginal majority %.3f; %.0f s",
      oracle, l2l, pct * r["label2label"]["aqn"]["mean_error"].get<double>(), aqn, fc, mlm_occ, majority_occ, secs);
  if (!failed.empty()) detail += "; unmet: " + failed;
  return {pass, detail};
}

// ---- 7. ablation grid smoke ------------------------------------------------------------------

Outcome ablation_grid(const Harness& h) {
  const fs::path dir = h.work / "sweeps";
  fs::remove_all(dir);
  const std::string common = " --d 16 --heads 2 --ffn_hidden 32 --epochs 2 --batch_size 32";
  const std::string quiet = " >/dev/null 2>&1";
  auto run = [&](const std::string& args) { return std::system(("\"" + h.cli + "\" " + args + quiet).c_str()); };

  std::vector<std::string> notes;
  bool pass = true;
  const int gen = run("generate --m 8 --k 3 --n_train 300 --n_val 50 --n_test 50 --out \"" + (dir / "data").string() + "\"");
  if (gen != 0) return {false, fmt("generate exited with status %d", gen)};
  const std::pair<std::string, std::vector<std::string>> grids[] = {
      {"alpha", {"0", "0.1", "0.15", "0.2", "0.3"}},
      {"lambda", {"0.5", "0.8", "1", "1.2", "1.5"}},
  };
  for (const auto& [axis, values] : grids) {
    std::string list;
    for (const auto& v : values) list += (list.empty() ? "" : ",") + v;
    const fs::path out = dir / axis;
    const int status = run("sweep --axis " + axis + " --values " + list + " --data \"" + (dir / "data").string() +
                           "\" --out \"" + out.string() + "\"" + common);
    std::istringstream csv(slurp(out / ("sweep_" + axis + ".csv")));
    std::string line, header;
    std::getline(csv, header);
    std::size_t rows = 0;
    while (std::getline(csv, line))
      if (!line.empty()) ++rows;
    const bool ok = status == 0 && header == "value,mean_error,mA,f1" && rows == values.size();
    pass = pass && ok;
    notes.push_back(fmt("%s: exit %d, %zu/%zu rows", axis.c_str(), status, rows, values.size()));
  }
  return {pass, notes[0] + "; " + notes[1]};
}

// ---- 8. attention sanity -------------------------------------------------------------------

Outcome attention_sanity(const Harness& h) {
  const fs::path dir = h.work / "attention";
  RunConfig c = benchmark_config();
  c.k = 2;  // the single-factor spec has no cross-factor pairs to compare against
  c.n_train = 2000;
  c.n_val = 250;
  c.n_test = 250;
  c.epochs = 20;
  c.out = (dir / "data").string();
  run_command("generate", c);
  c.data = c.out;
  c.out = (dir / "train").string();
  run_command("train", c);

  const Dataset ds = load_dataset(dir / "data");
  std::string ids;
  for (std::size_t i = 0; i < 100 && i < ds.split("test").size(); ++i)
    ids += (ids.empty() ? "" : ",") + std::to_string(ds.samples[ds.split("test")[i]].id);
  c.checkpoint = (dir / "train" / "checkpoint").string();
  c.samples = ids;
  c.out = (dir / "export").string();
  run_command("export-attention", c);

  const auto& factor = ds.generator->attr_map;
  struct Sums {
    double same = 0, cross = 0;
    std::size_t n_same = 0, n_cross = 0;
  };
  std::map<std::string, Sums> sums;
  for (const auto& entry : fs::directory_iterator(dir / "export")) {
    if (entry.path().extension() != ".json" || entry.path().filename() == "run.json") continue;
    const auto doc = read_json(entry.path());
    for (const auto& a : doc["attention"]) {
      if (a["kind"] != "self_attention") continue;
      Sums& s = sums[a["network"].get<std::string>()];
      const auto& matrix = a["matrix"];
      for (std::size_t i = 0; i < matrix.size(); ++i)
        for (std::size_t j = 0; j < matrix[i].size(); ++j) {
          if (i == j) continue;
          const double w = matrix[i][j].get<double>();
          if (factor[i] == factor[j]) {
            s.same += w;
            ++s.n_same;
          } else {
            s.cross += w;
            ++s.n_cross;
          }
        }
    }
  }
  const Sums& mlm = sums["icmlm"];
  const Sums& aqn = sums["aqn"];
  const double mlm_same = mlm.same / mlm.n_same, mlm_cross = mlm.cross / mlm.n_cross;
  const double aqn_same = aqn.same / aqn.n_same, aqn_cross = aqn.cross / aqn.n_cross;
  return {mlm_same > mlm_cross,
          fmt("K=2: IC-MLM word self-attention same-factor %.7f vs cross-factor %.7f; AQN query self-attention "
              "%.7f vs %.7f (informational)",
              mlm_same, mlm_cross, aqn_same, aqn_cross)};
}

// ---- 9. reproducibility ---------------------------------------------------------------------

std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() != "run.json") names.insert(fs::relative(e.path(), root).string());
  std::vector<std::string> diff;
  for (const auto& n : names)
    if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) diff.push_back(n);
  return diff;
}

Outcome reproducibility(const Harness& h) {
  const fs::path dir = h.work / "rerun";
  fs::remove_all(dir);
  RunConfig c;
  c.m = 4;
  c.k = 2;
  c.image_size = 8;
  c.n_train = 200;
  c.n_val = 40;
  c.n_test = 40;
  c.d = 8;
  c.heads = 2;
  c.ffn_hidden = 16;
  c.conv1 = 4;
  c.conv2 = 8;
  c.epochs = 3;
  c.batch_size = 16;
  c.weighting = "exponential";
  c.out = (dir / "data").string();
  run_command("generate", c);
  c.data = c.out;
  c.out = (dir / "train").string();
  run_command("train", c);
  c.checkpoint = (dir / "train" / "checkpoint").string();
  c.out = (dir / "eval").string();
  run_command("eval", c);
  c.samples = "1,2,3";
  c.out = (dir / "export").string();
  run_command("export-attention", c);

  std::size_t files = 0, bad = 0;
  std::string notes;
  for (const char* step : {"train", "eval", "export"}) {
    const fs::path first = dir / step, second = dir / (std::string(step) + "_rerun");
    rerun(first / "run.json", second.string());
    auto ra = read_json(first / "run.json"), rb = read_json(second / "run.json");
    ra["config"].erase("out");
    rb["config"].erase("out");
    const auto diff = differing_files(first, second);
    for (const auto& e : fs::recursive_directory_iterator(first)) files += e.is_regular_file();
    bad += diff.size() + (ra != rb);
    notes += fmt("%s%s: %zu differing", notes.empty() ? "" : ", ", step, diff.size() + (ra != rb));
  }
  return {bad == 0, fmt("%zu output files compared byte for byte; ", files) + notes};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  Harness h;
  std::string work = (fs::temp_directory_path() / "l2l_acceptance").string();
  std::vector<int> only;
  std::string report_path;
  bool strict = false;
  app.add_option("--work", work, "scratch directory for generated data and runs");
  app.add_option("--cli", h.cli, "path to the l2l executable")->required();
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_option("--report", report_path, "also write the result lines to this file");
  app.add_flag("--strict", strict, "exit non-zero when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  h.work = work;
  fs::create_directories(h.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Harness&)>>> criteria = {
      {"gradient soundness", gradient_soundness},
      {"metric oracle equivalence", metric_equivalence},
      {"loss formula fidelity", loss_fidelity},
      {"permutation properties", permutation_properties},
      {"masking statistics", masking_statistics},
      {"synthetic benchmark ordering", synthetic_benchmark},
      {"ablation grid smoke", ablation_grid},
      {"attention sanity", attention_sanity},
      {"reproducibility", reproducibility},
  };

  std::string lines;
  int failed = 0, errored = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second(h);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
      ++errored;
    }
    failed += !o.pass;
    const std::string line = fmt("%s [%d] %s: ", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str()) + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines += line + "\n";
  }
  const std::string summary = fmt("acceptance: %d failed, %d could not be evaluated", failed, errored);
  std::printf("%s\n", summary.c_str());
  if (!report_path.empty()) std::ofstream(report_path) << lines << summary << "\n";
  if (errored > 0) return 1;
  return strict && failed > 0 ? 1 : 0;
}
