#include "uc2/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "uc2/cascade_train.hpp"
#include "uc2/clustering.hpp"
#include "uc2/error.hpp"
#include "uc2/io.hpp"
#include "uc2/kernels.hpp"
#include "uc2/metrics.hpp"
#include "uc2/quantize.hpp"
#include "uc2/report.hpp"
#include "uc2/synth.hpp"

namespace uc2 {
namespace {

namespace fs = std::filesystem;

std::string env_name(const std::string& flag) {
  std::string name = "UC2_";
  for (char c : flag.substr(2)) {
    name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

// Every option also reads UC2_<FLAG>; CLI11 applies flag > env > default.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  return app->add_option(flag, value, help)->envname(env_name(flag));
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
  return app->add_flag(name, value, help)->envname(env_name(name));
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

SearchMode parse_mode(const std::string& mode, std::size_t nprobe, const Codebook& codebook,
                      const HierarchicalIndex* index) {
  if (mode == "exact") return SearchMode::exact();
  if (index == nullptr) {
    if (mode == "hier") fail(ErrorCode::kInvalidConfig, "--mode hier needs a codebook with an index");
    return SearchMode::exact();
  }
  if (mode == "hier") {
    return SearchMode::hierarchical(nprobe == 0 ? index->k1() : nprobe);
  }
  return SearchMode::automatic(codebook.k(), index->k1());
}

std::vector<TokenId> flatten(const io::TokenStream& stream) {
  std::vector<TokenId> ids;
  for (const auto& s : stream.sequences) ids.insert(ids.end(), s.tokens().begin(), s.tokens().end());
  return ids;
}

struct Common {
  std::size_t threads = 0;
};

// ---------------------------------------------------------------------------

struct GenSynthArgs {
  SynthSpec spec;
  std::string dist = "mixture";
  fs::path out;
  fs::path labels_out;
  bool paired = false;
  PairedSpec paired_spec;
};

void register_gen_synth(CLI::App& app, GenSynthArgs& a) {
  auto* s = app.add_subcommand("gen-synth", "generate a synthetic embedding corpus");
  opt(s, "--n", a.spec.n, "rows (items under --paired)");
  opt(s, "--dim", a.spec.dim, "embedding dimension");
  opt(s, "--components", a.spec.components, "mixture components");
  opt(s, "--separation", a.spec.separation, "minimum distance between means, in sigmas");
  opt(s, "--sigma", a.spec.sigma, "component standard deviation");
  opt(s, "--seed", a.spec.seed, "RNG seed");
  opt(s, "--dist", a.dist, "mixture|uniform")->check(CLI::IsMember({"mixture", "uniform"}));
  flag(s, "--labeled", a.spec.labeled, "also write component labels");
  opt(s, "--labels-out", a.labels_out, "label file (default <out>.labels.uc2t)");
  flag(s, "--paired", a.paired, "write a paired patch/prompt set to <out>.patches.uc2e and <out>.prompts.uc2e");
  opt(s, "--seq-len", a.paired_spec.seq_len, "patches per item (--paired)");
  opt(s, "--prompt-dim", a.paired_spec.prompt_dim, "prompt dimension (--paired)");
  opt(s, "--prompt-noise", a.paired_spec.prompt_noise, "prompt noise (--paired)");
  opt(s, "--per-item", a.paired_spec.components_per_item, "components per item (--paired)");
  opt(s, "--out", a.out, "output path")->required();
}

fs::path paired_patches(const fs::path& prefix) {
  auto p = prefix;
  p += ".patches.uc2e";
  return p;
}

fs::path paired_prompts(const fs::path& prefix) {
  auto p = prefix;
  p += ".prompts.uc2e";
  return p;
}

int run_gen_synth(GenSynthArgs& a, std::ostream& out) {
  KvReport report;
  if (a.paired) {
    auto& p = a.paired_spec;
    p.items = a.spec.n;
    p.dim = a.spec.dim;
    p.components = a.spec.components;
    p.separation = a.spec.separation;
    p.seed = a.spec.seed;
    const auto data = gen_paired(p);
    io::write_paired(paired_patches(a.out), paired_prompts(a.out), data.dataset);
    report.set("items", data.dataset.size());
    report.set("seq_len", p.seq_len);
    report.set("patches", paired_patches(a.out).string());
    report.set("prompts", paired_prompts(a.out).string());
  } else {
    a.spec.distribution =
        a.dist == "uniform" ? SynthDistribution::kUniform : SynthDistribution::kMixture;
    const auto data = gen_synth(a.spec);
    io::write_embeddings(a.out, data.embeddings);
    report.set("rows", data.embeddings.rows());
    report.set("dim", data.embeddings.dim());
    if (a.spec.labeled) {
      fs::path labels = a.labels_out;
      if (labels.empty()) {
        labels = a.out;
        labels += ".labels.uc2t";
      }
      io::write_labels(labels, data.labels, a.spec.components);
      report.set("labels", labels.string());
    }
  }
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  fs::path in;
  fs::path out;
  std::size_t k = 0;
  std::size_t k1 = 1;
  std::string alloc = "fixed";
  ClusterConfig cfg;
};

void register_build(CLI::App& app, BuildArgs& a) {
  auto* s = app.add_subcommand("build", "two-stage clustering into a codebook");
  opt(s, "--in", a.in, "embeddings (UC2E)")->required();
  opt(s, "--k", a.k, "codebook size")->required();
  opt(s, "--k1", a.k1, "coarse cells");
  opt(s, "--alloc", a.alloc, "fixed|proportional")->check(CLI::IsMember({"fixed", "proportional"}));
  opt(s, "--iters", a.cfg.max_iters, "Lloyd iteration cap per run");
  opt(s, "--tol", a.cfg.tol, "relative SSE improvement tolerance");
  opt(s, "--seed", a.cfg.seed, "RNG seed");
  opt(s, "--out", a.out, "codebook (UC2C)")->required();
}

int run_build(BuildArgs& a, const Common& common, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = io::read_embeddings(a.in);
  a.cfg.threads = common.threads;
  const auto alloc = a.alloc == "proportional" ? FineAllocation::kProportional : FineAllocation::kFixed;
  auto built = two_stage_cluster(data, a.k, a.k1, a.cfg, alloc);
  auto filtered = filter_invalid_centroids(built.codebook);
  const auto index = remap_index(built.index, filtered.remap);
  io::write_codebook(a.out, filtered.codebook, &index);

  KvReport report;
  report.set("K_requested", built.k_requested);
  report.set("K_final", filtered.codebook.k());
  report.set("K1", index.k1());
  report.set("filtered", filtered.removed);
  report.set("undersized_buckets", built.undersized_buckets);
  report.set("remainder_distributed", built.remainder_distributed);
  report.set("SSE", built.sse);
  report.set("coarse_iters", built.coarse_iters);
  report.set("fine_iters_total", built.fine_iters_total);
  report.set("isa", std::string(kernels::active().name));
  report.set("wall_ms", elapsed_ms(start));
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct QuantizeArgs {
  fs::path in;
  fs::path codebook;
  fs::path out;
  fs::path report;
  std::string mode = "auto";
  std::size_t nprobe = 0;
  std::size_t group = 0;
};

void register_quantize(CLI::App& app, QuantizeArgs& a) {
  auto* s = app.add_subcommand("quantize", "map embeddings to token ids");
  opt(s, "--in", a.in, "embeddings (UC2E)")->required();
  opt(s, "--codebook", a.codebook, "codebook (UC2C)")->required();
  opt(s, "--mode", a.mode, "exact|hier|auto")->check(CLI::IsMember({"exact", "hier", "auto"}));
  opt(s, "--nprobe", a.nprobe, "coarse cells probed in hier mode (0 = all)");
  opt(s, "--group", a.group, "tokens per output sequence (0 = one sequence)");
  opt(s, "--out", a.out, "tokens (UC2T)")->required();
  opt(s, "--report", a.report, "also write the key=value report here");
}

int run_quantize(const QuantizeArgs& a, const Common& common, std::ostream& out) {
  const auto data = io::read_embeddings(a.in);
  const auto stored = io::read_codebook(a.codebook);
  const HierarchicalIndex* index = stored.index ? &*stored.index : nullptr;
  const auto mode = parse_mode(a.mode, a.nprobe, stored.codebook, index);
  const auto q = quantize_batch(data, stored.codebook, index, mode, a.group, common.threads);
  io::write_tokens(a.out, q.sequences, stored.codebook.k());

  KvReport report;
  add_usage(report, q.histogram);
  add_distortion(report, quantization_distortion(data, stored.codebook, q.ids));
  report.set("mode", std::string(mode.kind == SearchMode::Kind::kExact ? "exact" : "hier"));
  if (mode.kind == SearchMode::Kind::kHierarchical) report.set("nprobe", mode.nprobe);
  report.set("fallbacks", q.fallbacks);
  report.set("sequences", q.sequences.size());
  if (!a.report.empty()) report.save(a.report);
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  fs::path tokens;
  fs::path embeddings;
  fs::path codebook;
  fs::path labels;
  fs::path table;
  fs::path out;
  ObjectiveParams params;
};

void register_metrics(CLI::App& app, MetricsArgs& a) {
  auto* s = app.add_subcommand("metrics", "usage, distortion and information metrics");
  opt(s, "--tokens", a.tokens, "tokens (UC2T)")->required();
  auto* e = opt(s, "--embeddings", a.embeddings, "embeddings the tokens came from (UC2E)");
  auto* c = opt(s, "--codebook", a.codebook, "codebook (UC2C)");
  e->needs(c);
  c->needs(e);
  opt(s, "--labels", a.labels, "per-token labels (UC2T)");
  opt(s, "--lambda", a.params.lambda, "spread weight in the codebook objective");
  opt(s, "--beta", a.params.beta, "entropy weight in the regularized loss");
  opt(s, "--table", a.table, "per-cluster CSV table");
  opt(s, "--out", a.out, "also write the key=value report here");
}

int run_metrics(const MetricsArgs& a, std::ostream& out) {
  a.params.validate();
  const auto stream = io::read_tokens(a.tokens);
  const auto ids = flatten(stream);
  const auto histogram = AssignmentHistogram::from_ids(ids, stream.k);
  KvReport report;
  add_usage(report, histogram);
  if (!a.embeddings.empty()) {
    const auto data = io::read_embeddings(a.embeddings);
    const auto stored = io::read_codebook(a.codebook);
    if (stored.codebook.k() != stream.k) {
      fail(ErrorCode::kShape, "token K " + std::to_string(stream.k) + " != codebook K " +
                                  std::to_string(stored.codebook.k()));
    }
    const auto d = quantization_distortion(data, stored.codebook, ids);
    add_distortion(report, d);
    const auto obj = codebook_objective(data, stored.codebook, ids, a.params.lambda);
    report.set("objective", obj.total);
    report.set("objective_alignment", obj.alignment);
    report.set("objective_spread", obj.utilization);
    if (histogram.total() > 0) {
      report.set("regularized_loss",
                 regularized_loss(d.total, assignment_entropy(histogram), a.params.beta));
    }
    if (!a.table.empty()) {
      std::ostringstream os;
      write_cluster_table(os, d);
      save_text(a.table, os.str());
    }
  } else {
    report.set("distortion", "unavailable");
  }
  if (!a.labels.empty()) {
    const auto [labels, num_labels] = io::read_labels(a.labels);
    const auto mi = mutual_information_estimate(ids, labels);
    report.set("label_classes", num_labels);
    report.set("mi_nats", mi.i_hat);
    report.set("h_tokens_nats", mi.h_v);
    report.set("h_labels_nats", mi.h_y);
    report.set("h_joint_nats", mi.h_joint);
  }
  if (!a.out.empty()) report.save(a.out);
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct RdScanArgs {
  fs::path in;
  std::vector<std::size_t> k_list;
  std::size_t retries = 4;
  ClusterConfig cfg;
  fs::path table;
};

void register_rd_scan(CLI::App& app, RdScanArgs& a) {
  auto* s = app.add_subcommand("rd-scan", "distortion versus codebook size");
  opt(s, "--in", a.in, "embeddings (UC2E)")->required();
  opt(s, "--k-list", a.k_list, "comma-separated codebook sizes")->required()->delimiter(',');
  opt(s, "--iters", a.cfg.max_iters, "Lloyd iteration cap");
  opt(s, "--tol", a.cfg.tol, "relative SSE tolerance");
  opt(s, "--seed", a.cfg.seed, "RNG seed");
  opt(s, "--retries", a.retries, "reseeded restarts when distortion rises with K");
  opt(s, "--table", a.table, "k,distortion,attempts CSV");
}

int run_rd_scan(RdScanArgs& a, const Common& common, std::ostream& out) {
  const auto data = io::read_embeddings(a.in);
  a.cfg.threads = common.threads;
  const auto scan = rate_distortion_scan(data, a.k_list, a.cfg, a.retries);
  KvReport report;
  report.set("dim", data.dim());
  report.set("rows", data.rows());
  for (const auto& p : scan.points) {
    report.set("D_k" + std::to_string(p.k), p.distortion);
  }
  report.set("degenerate", scan.degenerate);
  if (scan.slope) {
    report.set("slope", *scan.slope);
    report.set("slope_expected", -2.0 / static_cast<double>(data.dim()));
  } else {
    report.set("slope", "undefined");
  }
  if (!a.table.empty()) {
    std::ostringstream os;
    os << "k,distortion,attempts\n";
    for (const auto& p : scan.points) {
      os << p.k << ',' << format_double(p.distortion) << ',' << p.attempts << '\n';
    }
    save_text(a.table, os.str());
  }
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct CascadeArgs {
  fs::path codebook;
  fs::path data;
  fs::path out;
  fs::path trace;
  std::size_t d2 = 0;
  double map_scale = 1.0;
  bool freeze_c2 = false;
  bool freeze_projection = false;
  TrainConfig cfg;
};

void register_cascade(CLI::App& app, CascadeArgs& a) {
  auto* s = app.add_subcommand("cascade-train", "contrastive training of the trainable table");
  opt(s, "--codebook", a.codebook, "frozen codebook (UC2C)")->required();
  opt(s, "--data", a.data, "paired set prefix (<data>.patches.uc2e, <data>.prompts.uc2e)")->required();
  opt(s, "--lr", a.cfg.lr, "SGD learning rate");
  opt(s, "--tau", a.cfg.tau_temp, "softmax temperature");
  opt(s, "--batch", a.cfg.batch_size, "batch size");
  opt(s, "--steps", a.cfg.steps, "SGD steps");
  opt(s, "--seed", a.cfg.seed, "RNG seed");
  opt(s, "--eval-every", a.cfg.eval_every, "steps between utilization measurements");
  opt(s, "--d2", a.d2, "trainable dimension (0 = codebook dimension)");
  opt(s, "--map-scale", a.map_scale, "initial projection scale");
  flag(s, "--freeze-c2", a.freeze_c2, "keep the trainable table fixed");
  flag(s, "--freeze-projection", a.freeze_projection, "keep the projection fixed");
  opt(s, "--out-cascade", a.out, "trained table (UC2C) plus <out>.proj.uc2e")->required();
  opt(s, "--trace", a.trace, "per-step CSV trace");
}

int run_cascade(CascadeArgs& a, std::ostream& out) {
  auto stored = io::read_codebook(a.codebook);
  const auto prompts = io::read_matrix(paired_prompts(a.data));
  const auto patches = io::read_matrix(paired_patches(a.data));
  if (prompts.rows() == 0 || patches.rows() % prompts.rows() != 0) {
    fail(ErrorCode::kShape, "patch rows must be a positive multiple of prompt rows");
  }
  const auto dataset = io::read_paired(paired_patches(a.data), paired_prompts(a.data),
                                       patches.rows() / prompts.rows());
  auto frozen = std::make_shared<const Codebook>(std::move(stored.codebook));
  std::shared_ptr<const HierarchicalIndex> index;
  if (stored.index) index = std::make_shared<const HierarchicalIndex>(std::move(*stored.index));
  CascadedCodebook cascade(frozen, index, a.d2, a.cfg.seed);
  auto map = ProjectionMap::random(cascade.d2(), prompts.cols(), a.cfg.seed + 1, a.map_scale);
  a.cfg.update_targets.c2_table = !a.freeze_c2;
  a.cfg.update_targets.projection = !a.freeze_projection;
  const SearchMode mode =
      index ? SearchMode::automatic(frozen->k(), index->k1()) : SearchMode::exact();
  auto result = train_cascade(std::move(cascade), std::move(map), dataset, a.cfg, nullptr, mode);
  io::write_cascade(a.out, result.cascade, result.map);
  if (!a.trace.empty()) save_trace_csv(a.trace, result.trace);

  KvReport report;
  report.set("K", result.cascade.k());
  report.set("d2", result.cascade.d2());
  report.set("steps", result.trace.size());
  if (!result.trace.empty()) {
    const std::size_t window = std::max<std::size_t>(1, result.trace.size() / 10);
    report.set("loss_first", result.trace.front().loss);
    report.set("loss_last", result.trace.back().loss);
    report.set("loss_trailing_mean", trailing_mean(result.trace, result.trace.size(), window));
    report.set("utilization", result.trace.back().utilization);
  }
  report.set("frozen_sha256_before", result.frozen_checksum_before);
  report.set("frozen_sha256_after", result.frozen_checksum_after);
  report.set("frozen_unchanged", result.frozen_checksum_before == result.frozen_checksum_after);
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct CollapseArgs {
  fs::path train;
  fs::path eval;
  fs::path trace;
  std::string init = "clustered";
  CollapseSimConfig cfg;
};

void register_collapse(CLI::App& app, CollapseArgs& a) {
  auto* s = app.add_subcommand("collapse-sim", "utilization under partial-update VQ training");
  opt(s, "--train", a.train, "training embeddings (UC2E)")->required();
  opt(s, "--eval", a.eval, "evaluation embeddings (UC2E, default: training set)");
  opt(s, "--k", a.cfg.k, "codebook size")->required();
  opt(s, "--init", a.init, "clustered|random")->check(CLI::IsMember({"clustered", "random"}));
  opt(s, "--epochs", a.cfg.epochs, "passes over the training set");
  opt(s, "--lr", a.cfg.lr, "code update rate");
  opt(s, "--commit", a.cfg.commit_weight, "commitment weight");
  opt(s, "--batch", a.cfg.batch_size, "batch size");
  opt(s, "--seed", a.cfg.seed, "RNG seed");
  opt(s, "--init-scale", a.cfg.init_scale, "std of random codes");
  opt(s, "--k1", a.cfg.k1, "coarse cells for clustered init (0 = floor(sqrt(k)))");
  opt(s, "--cluster-iters", a.cfg.cluster_iters, "Lloyd iterations for clustered init");
  opt(s, "--trace", a.trace, "epoch,utilization CSV");
}

int run_collapse(CollapseArgs& a, std::ostream& out) {
  const auto train = io::read_embeddings(a.train);
  if (!a.eval.empty()) {
    a.cfg.eval_set = std::make_shared<const EmbeddingMatrix>(io::read_embeddings(a.eval));
  }
  a.cfg.init = a.init == "random" ? CodebookInit::kRandomGaussian : CodebookInit::kClustered;
  const auto start = std::chrono::steady_clock::now();
  const auto result = vq_baseline_train(a.cfg, train);
  if (!a.trace.empty()) {
    std::ostringstream os;
    os << "epoch,utilization\n0," << format_double(result.initial_utilization) << '\n';
    for (std::size_t e = 0; e < result.utilization.size(); ++e) {
      os << e + 1 << ',' << format_double(result.utilization[e]) << '\n';
    }
    save_text(a.trace, os.str());
  }
  KvReport report;
  report.set("K", a.cfg.k);
  report.set("init", a.init);
  report.set("epochs", result.utilization.size());
  report.set("initial_utilization", result.initial_utilization);
  report.set("utilization",
             result.utilization.empty() ? result.initial_utilization : result.utilization.back());
  report.set("wall_ms", elapsed_ms(start));
  report.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct GradCheckArgs {
  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  double eps = 1e-4;
  double tol = 1e-4;
  double floor = 1e-6;
};

void register_grad_check(CLI::App& app, GradCheckArgs& a) {
  auto* s = app.add_subcommand("grad-check", "finite-difference audit of the contrastive gradient");
  opt(s, "--seeds", a.seeds, "number of random instances");
  opt(s, "--first-seed", a.first_seed, "seed of the first instance");
  opt(s, "--eps", a.eps, "central-difference step");
  opt(s, "--tol", a.tol, "maximum relative error");
  opt(s, "--floor", a.floor, "denominator floor of the relative error");
}

int run_grad_check(const GradCheckArgs& a, std::ostream& out, std::ostream& err) {
  double worst = 0.0;
  std::size_t components = 0;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < a.seeds; ++i) {
    const auto seed = a.first_seed + i;
    const auto r = finite_difference_check(random_grad_instance(seed), a.eps, a.floor);
    worst = std::max(worst, r.max_rel_error);
    components += r.components;
    if (!(r.max_rel_error <= a.tol)) ++failures;
  }
  KvReport report;
  report.set("instances", a.seeds);
  report.set("components", components);
  report.set("max_rel_error", worst);
  report.set("tolerance", a.tol);
  report.set("failures", failures);
  report.write(out);
  if (failures > 0) {
    err << "error code=grad_check_failed exit=3 message=\"" << failures
        << " instance(s) above tolerance\"\n";
    return 3;
  }
  return 0;
}

std::string quote(std::string s) {
  std::replace(s.begin(), s.end(), '"', '\'');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"uc2: codebook construction, quantization and metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  opt(&app, "--threads", common.threads, "worker threads (0 = hardware concurrency)");
  std::string isa;
  opt(&app, "--isa", isa, "force a kernel ISA (scalar|avx2|neon)");

  GenSynthArgs gen;
  BuildArgs build;
  QuantizeArgs quant;
  MetricsArgs metrics;
  RdScanArgs rd;
  CascadeArgs cascade;
  CollapseArgs collapse;
  GradCheckArgs grad;
  register_gen_synth(app, gen);
  register_build(app, build);
  register_quantize(app, quant);
  register_metrics(app, metrics);
  register_rd_scan(app, rd);
  register_cascade(app, cascade);
  register_collapse(app, collapse);
  register_grad_check(app, grad);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error code=usage exit=1 message=\"" << quote(e.what()) << "\"\n";
    return 1;
  }

  try {
    if (!isa.empty()) {
      const auto parsed = kernels::parse_isa(isa);
      if (!parsed || !kernels::force_isa(*parsed)) {
        fail(ErrorCode::kInvalidConfig, "ISA '" + isa + "' is unknown or unsupported here");
      }
    }
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen-synth") return run_gen_synth(gen, out);
    if (name == "build") return run_build(build, common, out);
    if (name == "quantize") return run_quantize(quant, common, out);
    if (name == "metrics") return run_metrics(metrics, out);
    if (name == "rd-scan") return run_rd_scan(rd, common, out);
    if (name == "cascade-train") return run_cascade(cascade, out);
    if (name == "collapse-sim") return run_collapse(collapse, out);
    if (name == "grad-check") return run_grad_check(grad, out, err);
    return 1;
  } catch (const Error& e) {
    const int status = exit_status_for(e.code());
    err << "error code=" << error_code_name(e.code()) << " exit=" << status << " message=\""
        << quote(e.what()) << "\"\n";
    return status;
  } catch (const std::exception& e) {
    err << "error code=internal exit=1 message=\"" << quote(e.what()) << "\"\n";
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace uc2
