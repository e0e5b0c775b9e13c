#include "sclft/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

namespace sclft {

namespace {

constexpr std::uint64_t kInitStream = 0x11a7;
constexpr std::uint64_t kHeadStream = 0x6ead;
constexpr std::uint64_t kNoiseStream = 0xa406;

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void ProtocolConfig::validate() const {
  require(n_samples >= 1, Errc::invalid_argument, "ProtocolConfig: n_samples must be >= 1");
  require(top_k >= 1 && top_k <= n_samples, Errc::invalid_argument,
          "ProtocolConfig: top_k must lie in [1, n_samples]");
  require(seeds.empty() || seeds.size() == n_samples, Errc::invalid_argument,
          "ProtocolConfig: seeds must be empty or have n_samples entries");
  for (double l : lambda_grid)
    require(l >= 0.0 && l <= 1.0, Errc::invalid_argument, "ProtocolConfig: lambda outside [0,1]");
  for (double t : tau_grid)
    require(t > 0.0, Errc::invalid_argument, "ProtocolConfig: grid tau must be positive");
  for (double t : noise_temperatures)
    require(t >= 0.0, Errc::invalid_argument, "ProtocolConfig: noise temperature < 0");
  require(jobs >= 1, Errc::invalid_argument, "ProtocolConfig: jobs must be >= 1");
}

std::vector<std::uint64_t> ProtocolConfig::resolved_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out[i] = i + 1;
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t width = std::min(jobs, n);
  pool.reserve(width);
  for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string loss_label(const LossConfig& cfg) {
  switch (cfg.variant) {
    case LossVariant::CE:
      return "ce";
    case LossVariant::SCL:
      return "scl(tau=" + fmt_g(cfg.tau) + ")";
    case LossVariant::Combined:
      return "combined(lambda=" + fmt_g(cfg.lambda) + ",tau=" + fmt_g(cfg.tau) + ")";
    case LossVariant::SelfSupervised:
      return "self_supervised(tau=" + fmt_g(cfg.tau) + ")";
    case LossVariant::CeCe:
      return "ce_ce(lambda=" + fmt_g(cfg.lambda) + ",tau=" + fmt_g(cfg.tau) + ")";
  }
  return "?";
}

std::vector<std::size_t> select_top_k(const std::vector<RunRecord>& records, std::size_t k) {
  require(k >= 1 && k <= records.size(), Errc::invalid_argument,
          "select_top_k: k outside [1, records]");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].validation_accuracy != records[b].validation_accuracy)
      return records[a].validation_accuracy > records[b].validation_accuracy;
    return records[a].sample_index < records[b].sample_index;
  });
  order.resize(k);
  return order;
}

ReportRow report_from_records(const std::string& label, const std::vector<RunRecord>& records,
                              const std::vector<std::size_t>& chosen,
                              const std::vector<double>* baseline_test) {
  require(!chosen.empty(), Errc::insufficient_runs, "report_from_records: no records chosen");
  std::vector<double> test, val;
  test.reserve(chosen.size());
  for (std::size_t i : chosen) {
    test.push_back(records[i].test_accuracy);
    val.push_back(records[i].validation_accuracy);
  }
  ReportRow row;
  row.label = label;
  row.n = chosen.size();
  row.mean_test = mean(test);
  row.std_test = population_std(test);
  row.mean_validation = mean(val);
  if (baseline_test != nullptr && !baseline_test->empty()) {
    row.p_value = welch_t_test(test, *baseline_test).p_value;
  }
  return row;
}

std::vector<ReportRow> aggregate_report(const std::vector<RunRecord>& records,
                                        const std::vector<RunRecord>& baseline_records) {
  require(!records.empty(), Errc::insufficient_runs, "aggregate_report: no records");

  auto group_of = [](const std::vector<RunRecord>& rs) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!groups.count(rs[i].group)) order.push_back(rs[i].group);
      groups[rs[i].group].push_back(i);
    }
    return std::pair{order, groups};
  };
  const auto [order, groups] = group_of(records);
  const auto [border, bgroups] = group_of(baseline_records);

  std::vector<ReportRow> rows;
  for (const std::string& g : order) {
    const auto& idx = groups.at(g);
    require(idx.size() >= 2, Errc::insufficient_runs,
            "aggregate_report: group '" + g + "' has fewer than 2 records");
    std::vector<double> baseline;
    const std::vector<std::size_t>* bidx = nullptr;
    if (const auto it = bgroups.find(g); it != bgroups.end()) {
      bidx = &it->second;
    } else if (bgroups.size() == 1) {
      bidx = &bgroups.begin()->second;
    }
    if (bidx != nullptr) {
      for (std::size_t i : *bidx) baseline.push_back(baseline_records[i].test_accuracy);
    }
    rows.push_back(report_from_records(g, records, idx, baseline.empty() ? nullptr : &baseline));
  }
  return rows;
}

namespace {

struct RunSpec {
  Dataset train;
  Model init;
  TrainConfig train_cfg;
  std::string group;
  std::size_t sample_index = 0;
  std::uint64_t seed = 0;
};

RunRecord execute_run(const RunSpec& spec, const Splits& splits) {
  const TrainResult tr = train_run(spec.train, splits.validation, spec.init, spec.train_cfg);
  const Model best = model_from_checkpoint(tr.best);
  RunRecord rec;
  rec.group = spec.group;
  rec.sample_index = spec.sample_index;
  rec.seed = spec.seed;
  rec.loss = spec.train_cfg.loss;
  rec.n_train = spec.train.size();
  rec.epochs = tr.history.size();
  rec.validation_accuracy = tr.best_validation_accuracy;
  rec.test_accuracy = evaluate(best, splits.test);
  rec.updates_per_second = tr.throughput.rate();
  rec.steps = tr.throughput.steps;
  return rec;
}

std::vector<RunRecord> execute_runs(const std::vector<RunSpec>& specs, const Splits& splits,
                                    std::size_t jobs) {
  std::vector<RunRecord> records(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) { records[i] = execute_run(specs[i], splits); });
  return records;
}

void reinit_head(ModelParams& params, std::size_t embed_dim, int num_classes,
                 std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t c = static_cast<std::size_t>(num_classes);
  const double a = std::sqrt(6.0 / static_cast<double>(embed_dim + c));
  params.head_w = Matrix(c, embed_dim);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < embed_dim; ++j) params.head_w(i, j) = rng.uniform(-a, a);
  params.head_b = Vector(c, 0.0);
}

bool same_architecture(const EncoderConfig& a, const EncoderConfig& b) {
  return a.vocab_hash_dim == b.vocab_hash_dim && a.hidden_dims == b.hidden_dims &&
         a.embed_dim == b.embed_dim && a.max_len == b.max_len;
}

}  // namespace

FewshotResult run_fewshot(const Splits& splits, const ProtocolConfig& cfg,
                          const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg) {
  cfg.validate();
  const auto seeds = cfg.resolved_seeds();
  const std::string label = loss_label(train_cfg.loss);

  std::vector<RunSpec> specs;
  specs.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    RunSpec spec;
    spec.train = stratified_sample(splits.train, cfg.n_labeled, seeds[i]);
    spec.init = make_model(encoder_cfg, splits.train.num_classes, mix_seed(seeds[i], kInitStream));
    spec.train_cfg = train_cfg;
    spec.train_cfg.seed = seeds[i];
    spec.group = label;
    spec.sample_index = i;
    spec.seed = seeds[i];
    specs.push_back(std::move(spec));
  }

  FewshotResult out;
  out.records = execute_runs(specs, splits, cfg.jobs);
  out.top_indices = select_top_k(out.records, cfg.top_k);
  out.report = report_from_records(label, out.records, out.top_indices);
  return out;
}

SweepResult run_sweep(const Splits& splits, const ProtocolConfig& cfg,
                      const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg) {
  cfg.validate();
  require(!cfg.lambda_grid.empty() && !cfg.tau_grid.empty(), Errc::invalid_argument,
          "run_sweep: empty grid");

  SweepResult out;
  bool have_best = false;
  double best_val = 0.0;
  for (double lambda : cfg.lambda_grid) {
    for (double tau : cfg.tau_grid) {
      TrainConfig tc = train_cfg;
      tc.loss.lambda = lambda;
      tc.loss.tau = tau;
      const FewshotResult fs = run_fewshot(splits, cfg, tc, encoder_cfg);
      out.records.insert(out.records.end(), fs.records.begin(), fs.records.end());
      out.cells.push_back({lambda, tau, fs.report});

      const double v = fs.report.mean_validation;
      // ties break toward larger lambda, then smaller tau
      const bool wins = !have_best || v > best_val ||
                        (v == best_val && (lambda > out.best_lambda ||
                                           (lambda == out.best_lambda && tau < out.best_tau)));
      if (wins) {
        have_best = true;
        best_val = v;
        out.best_lambda = lambda;
        out.best_tau = tau;
      }
    }
  }
  return out;
}

NoiseResult run_noise_robustness(const Splits& splits, const ProtocolConfig& cfg,
                                 const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg) {
  cfg.validate();
  require(!cfg.noise_temperatures.empty(), Errc::invalid_argument,
          "run_noise_robustness: no temperatures");
  const auto seeds = cfg.resolved_seeds();
  const bool with_baseline = train_cfg.loss.variant != LossVariant::CE;

  // one base sample per seed, reused across all temperatures so the
  // comparison is paired
  std::vector<Dataset> base_samples;
  base_samples.reserve(seeds.size());
  for (const std::uint64_t seed : seeds)
    base_samples.push_back(stratified_sample(splits.train, cfg.n_labeled, seed));

  NoiseResult out;
  for (std::size_t ti = 0; ti < cfg.noise_temperatures.size(); ++ti) {
    const double temperature = cfg.noise_temperatures[ti];
    const std::string tlabel = "T=" + fmt_g(temperature);

    std::vector<RunSpec> method_specs, baseline_specs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      NoiseChannelConfig nc = cfg.noise;
      nc.temperature = temperature;
      nc.seed = mix_seed(seeds[i], kNoiseStream + ti);
      Dataset augmented = augment_noise(base_samples[i], nc);

      RunSpec spec;
      spec.train = std::move(augmented);
      spec.init = make_model(encoder_cfg, splits.train.num_classes, mix_seed(seeds[i], kInitStream));
      spec.train_cfg = train_cfg;
      spec.train_cfg.seed = seeds[i];
      spec.group = tlabel;
      spec.sample_index = i;
      spec.seed = seeds[i];
      if (with_baseline) {
        RunSpec base = spec;
        base.train_cfg.loss = LossConfig{0.0, train_cfg.loss.tau, LossVariant::CE};
        base.group = tlabel + "|ce";
        baseline_specs.push_back(std::move(base));
      }
      method_specs.push_back(std::move(spec));
    }

    const auto method_records = execute_runs(method_specs, splits, cfg.jobs);
    const auto top = select_top_k(method_records, cfg.top_k);
    std::vector<double> baseline_test;
    if (with_baseline) {
      const auto baseline_records = execute_runs(baseline_specs, splits, cfg.jobs);
      const auto btop = select_top_k(baseline_records, cfg.top_k);
      for (std::size_t i : btop) baseline_test.push_back(baseline_records[i].test_accuracy);
      out.baseline_rows.push_back(report_from_records(tlabel + "|ce", baseline_records, btop));
      out.records.insert(out.records.end(), baseline_records.begin(), baseline_records.end());
    }
    out.rows.push_back(report_from_records(tlabel, method_records, top,
                                           baseline_test.empty() ? nullptr : &baseline_test));
    out.records.insert(out.records.end(), method_records.begin(), method_records.end());
  }
  return out;
}

TransferResult run_transfer(const Checkpoint& source, const Splits& target,
                            const ProtocolConfig& cfg, const TrainConfig& train_cfg,
                            const EncoderConfig& encoder_cfg) {
  cfg.validate();
  require(same_architecture(source.config, encoder_cfg), Errc::config_mismatch,
          "run_transfer: source checkpoint architecture differs from target config");
  const auto seeds = cfg.resolved_seeds();
  const int target_classes = target.train.num_classes;

  std::vector<RunSpec> transfer_specs, scratch_specs;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Dataset sample = sample_per_class(target.train, cfg.transfer_per_class, seeds[i]);

    // encoder weights copied verbatim; head always reinitialized
    Model warm{source.config, target_classes, source.params};
    reinit_head(warm.params, source.config.embed_dim, target_classes,
                mix_seed(seeds[i], kHeadStream));

    RunSpec spec;
    spec.train = sample;
    spec.init = std::move(warm);
    spec.train_cfg = train_cfg;
    spec.train_cfg.seed = seeds[i];
    spec.group = "transfer";
    spec.sample_index = i;
    spec.seed = seeds[i];
    transfer_specs.push_back(spec);

    spec.init = make_model(encoder_cfg, target_classes, mix_seed(seeds[i], kInitStream));
    spec.group = "scratch";
    scratch_specs.push_back(std::move(spec));
  }

  TransferResult out;
  const auto transfer_records = execute_runs(transfer_specs, target, cfg.jobs);
  const auto scratch_records = execute_runs(scratch_specs, target, cfg.jobs);

  const auto ttop = select_top_k(transfer_records, cfg.top_k);
  const auto stop = select_top_k(scratch_records, cfg.top_k);
  std::vector<double> scratch_test;
  for (std::size_t i : stop) scratch_test.push_back(scratch_records[i].test_accuracy);

  out.transfer = report_from_records("transfer", transfer_records, ttop, &scratch_test);
  out.scratch = report_from_records("scratch", scratch_records, stop);
  out.records = transfer_records;
  out.records.insert(out.records.end(), scratch_records.begin(), scratch_records.end());
  return out;
}

AblationResult run_batch_ablation(const Splits& splits, const ProtocolConfig& cfg,
                                  const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg) {
  cfg.validate();
  require(!cfg.batch_sizes.empty(), Errc::invalid_argument, "run_batch_ablation: no batch sizes");
  for (std::size_t b : cfg.batch_sizes)
    require(b >= 2, Errc::invalid_argument, "run_batch_ablation: batch sizes must be >= 2");

  LossConfig method = train_cfg.loss;
  if (method.variant == LossVariant::CE) method = LossConfig{};  // combined default
  const std::vector<LossConfig> variants = {LossConfig{0.0, method.tau, LossVariant::CE}, method};

  const auto seeds = cfg.resolved_seeds();
  std::vector<Dataset> samples;
  samples.reserve(seeds.size());
  for (const std::uint64_t seed : seeds)
    samples.push_back(stratified_sample(splits.train, cfg.n_labeled, seed));

  AblationResult out;
  for (const std::size_t batch : cfg.batch_sizes) {
    for (const LossConfig& loss : variants) {
      TrainConfig tc = train_cfg;
      tc.batch_size = batch;
      tc.loss = loss;
      // >= 50 optimizer steps per run, no early stopping
      const std::size_t steps_per_epoch = (cfg.n_labeled + batch - 1) / batch;
      tc.max_epochs = std::max(tc.max_epochs, (50 + steps_per_epoch - 1) / steps_per_epoch);
      tc.patience = tc.max_epochs;

      const std::string label = loss_label(loss) + "@batch" + std::to_string(batch);
      std::vector<RunSpec> specs;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        RunSpec spec;
        spec.train = samples[i];
        spec.init = make_model(encoder_cfg, splits.train.num_classes,
                               mix_seed(seeds[i], kInitStream));
        spec.train_cfg = tc;
        spec.train_cfg.seed = seeds[i];
        spec.group = label;
        spec.sample_index = i;
        spec.seed = seeds[i];
        specs.push_back(std::move(spec));
      }
      const auto records = execute_runs(specs, splits, cfg.jobs);

      std::vector<double> rates;
      for (const RunRecord& r : records) {
        ThroughputMeter m;
        m.steps = r.steps;
        m.seconds = r.updates_per_second > 0.0
                        ? static_cast<double>(r.steps) / r.updates_per_second
                        : 0.0;
        rates.push_back(measure_throughput(m));
      }

      AblationCell cell;
      cell.batch_size = batch;
      cell.variant = loss_label(loss);
      cell.report = report_from_records(label, records, select_top_k(records, cfg.top_k));
      cell.mean_updates_per_second = mean(rates);
      out.cells.push_back(std::move(cell));
      out.records.insert(out.records.end(), records.begin(), records.end());
    }
  }
  return out;
}

EmbeddingSummary embedding_cosine_summary(const EmbeddingMatrix& z,
                                          const std::vector<int>& labels) {
  require(z.n() == labels.size(), Errc::shape_mismatch,
          "embedding_cosine_summary: labels/embeddings mismatch");
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < z.n(); ++i) {
    for (std::size_t j = i + 1; j < z.n(); ++j) {
      const double d = dot(z.row(i), z.row(j));
      if (labels[i] == labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  EmbeddingSummary s;
  s.n_rows = z.n();
  s.intra_class_mean_cosine = n_intra > 0 ? intra / static_cast<double>(n_intra) : 0.0;
  s.inter_class_mean_cosine = n_inter > 0 ? inter / static_cast<double>(n_inter) : 0.0;
  return s;
}

EmbeddingSummary export_embeddings(const Model& model, const Dataset& ds,
                                   const std::filesystem::path& path) {
  require(!ds.empty(), Errc::empty_dataset, "export_embeddings: empty dataset");
  const Matrix features = featurize(ds, model.config);
  const EncodeResult enc = encode_features(features, model.params);
  const Matrix projected = pca_project_2d(enc.raw);

  std::ofstream out(path, std::ios::trunc);
  require(out.good(), Errc::io_error, "export_embeddings: cannot open " + path.string());
  out << "id\tlabel";
  for (std::size_t j = 0; j < enc.raw.cols(); ++j) out << "\traw_" << j;
  out << "\tpca_0\tpca_1\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.examples[i].id << '\t' << ds.examples[i].label;
    for (std::size_t j = 0; j < enc.raw.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", enc.raw(i, j));
      out << '\t' << buf;
    }
    for (std::size_t j = 0; j < 2; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", projected(i, j));
      out << '\t' << buf;
    }
    out << '\n';
  }
  require(out.good(), Errc::io_error, "export_embeddings: write failed");

  std::vector<int> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.examples[i].label;
  const EmbeddingSummary summary = embedding_cosine_summary(enc.normalized, labels);

  std::filesystem::path spath = path;
  spath.replace_filename(path.stem().string() + "_summary.json");
  std::ofstream sj(spath, std::ios::trunc);
  require(sj.good(), Errc::io_error, "export_embeddings: cannot open " + spath.string());
  sj << nlohmann::json{{"intra_class_mean_cosine", summary.intra_class_mean_cosine},
                       {"inter_class_mean_cosine", summary.inter_class_mean_cosine},
                       {"gap", summary.intra_class_mean_cosine - summary.inter_class_mean_cosine},
                       {"rows", summary.n_rows}}
            .dump(2)
     << '\n';
  return summary;
}

void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), Errc::io_error, "write_records_jsonl: cannot open " + path.string());
  for (const RunRecord& r : records) {
    const nlohmann::json j{{"group", r.group},
                           {"sample", r.sample_index},
                           {"seed", r.seed},
                           {"variant", to_string(r.loss.variant)},
                           {"lambda", r.loss.lambda},
                           {"tau", r.loss.tau},
                           {"n_train", r.n_train},
                           {"epochs", r.epochs},
                           {"validation_accuracy", r.validation_accuracy},
                           {"test_accuracy", r.test_accuracy}};
    out << j.dump() << '\n';
  }
  require(out.good(), Errc::io_error, "write_records_jsonl: write failed");
}

void write_report_tsv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), Errc::io_error, "write_report_tsv: cannot open " + path.string());
  out << "# std is population std over the selected runs\n";
  out << "setting\tn\tmean_test_acc\tstd_test_acc\tmean_val_acc\tp_value_vs_baseline\n";
  char buf[256];
  for (const ReportRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%zu\t%.6f\t%.6f\t%.6f\t", r.label.c_str(), r.n,
                  r.mean_test, r.std_test, r.mean_validation);
    out << buf;
    if (r.p_value) {
      std::snprintf(buf, sizeof(buf), "%.6g", *r.p_value);
      out << buf;
    } else {
      out << "NA";
    }
    out << '\n';
  }
  require(out.good(), Errc::io_error, "write_report_tsv: write failed");
}

void write_timings_tsv(const std::filesystem::path& path,
                       const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), Errc::io_error, "write_timings_tsv: cannot open " + path.string());
  out << "# wall-clock telemetry; machine-dependent, excluded from determinism guarantees\n";
  out << "group\tsample\tseed\tsteps\tupdates_per_second\n";
  char buf[256];
  for (const RunRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%s\t%zu\t%llu\t%zu\t%.3f\n", r.group.c_str(), r.sample_index,
                  static_cast<unsigned long long>(r.seed), r.steps, r.updates_per_second);
    out << buf;
  }
  require(out.good(), Errc::io_error, "write_timings_tsv: write failed");
}

}  // namespace sclft
