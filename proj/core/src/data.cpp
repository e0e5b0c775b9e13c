#include "sclft/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sclft/encoder.hpp"
#include "sclft/rng.hpp"

namespace sclft {

bool Dataset::has_pairs() const {
  return std::any_of(examples.begin(), examples.end(),
                     [](const Example& e) { return e.text_b.has_value(); });
}

std::vector<double> Dataset::label_distribution() const {
  std::vector<double> dist(static_cast<std::size_t>(num_classes), 0.0);
  for (const Example& e : examples) dist[static_cast<std::size_t>(e.label)] += 1.0;
  for (double& d : dist) d /= static_cast<double>(examples.size());
  return dist;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.label_names = label_names;
  out.examples.reserve(indices.size());
  for (std::size_t i : indices) out.examples.push_back(examples[i]);
  return out;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  raise(Errc::parse_error, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::map<std::string, int> load_label_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "load_label_map: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::parse_error, std::string("load_label_map: ") + e.what());
  }
  require(j.is_object(), Errc::parse_error, "load_label_map: expected a JSON object");
  std::map<std::string, int> out;
  for (const auto& [k, v] : j.items()) {
    require(v.is_number_integer(), Errc::parse_error, "load_label_map: index must be an integer");
    out[k] = v.get<int>();
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::map<std::string, int>* label_map) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "load_dataset: cannot open " + path.string());

  struct RawRecord {
    std::string id;
    std::string text_a;
    std::optional<std::string> text_b;
    std::optional<int> int_label;
    std::string str_label;
  };
  std::vector<RawRecord> raw;
  bool any_int_label = false, any_str_label = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      parse_fail(line_no, e.what());
    }
    if (!j.is_object()) parse_fail(line_no, "record is not a JSON object");
    if (!j.contains("text_a") || !j["text_a"].is_string()) parse_fail(line_no, "missing text_a");
    if (!j.contains("label")) parse_fail(line_no, "missing label");

    RawRecord r;
    r.text_a = j["text_a"].get<std::string>();
    if (r.text_a.empty()) parse_fail(line_no, "empty text_a");
    if (j.contains("id")) {
      if (!j["id"].is_string()) parse_fail(line_no, "id must be a string");
      r.id = j["id"].get<std::string>();
    } else {
      r.id = "line-" + std::to_string(line_no);
    }
    if (j.contains("text_b") && !j["text_b"].is_null()) {
      if (!j["text_b"].is_string()) parse_fail(line_no, "text_b must be a string");
      r.text_b = j["text_b"].get<std::string>();
    }
    const auto& lab = j["label"];
    if (lab.is_number_integer()) {
      r.int_label = lab.get<int>();
      if (*r.int_label < 0) parse_fail(line_no, "negative label index");
      any_int_label = true;
    } else if (lab.is_string()) {
      r.str_label = lab.get<std::string>();
      any_str_label = true;
    } else {
      parse_fail(line_no, "label must be a string or an integer");
    }
    raw.push_back(std::move(r));
  }
  require(!raw.empty(), Errc::empty_file, "load_dataset: no records in " + path.string());
  require(!(any_int_label && any_str_label), Errc::parse_error,
          "load_dataset: mixed integer and string labels");

  Dataset ds;
  if (any_int_label) {
    int max_label = 0;
    for (const RawRecord& r : raw) max_label = std::max(max_label, *r.int_label);
    ds.num_classes = max_label + 1;
    for (int c = 0; c < ds.num_classes; ++c) ds.label_names.push_back(std::to_string(c));
    for (RawRecord& r : raw)
      ds.examples.push_back({std::move(r.id), std::move(r.text_a), std::move(r.text_b), *r.int_label});
  } else {
    std::map<std::string, int> map;
    if (label_map != nullptr) {
      map = *label_map;
    } else {
      std::set<std::string> names;
      for (const RawRecord& r : raw) names.insert(r.str_label);
      int idx = 0;
      for (const std::string& n : names) map[n] = idx++;
    }
    int max_index = 0;
    for (const auto& [name, idx] : map) {
      require(idx >= 0, Errc::parse_error, "label map: negative index for " + name);
      max_index = std::max(max_index, idx);
    }
    ds.num_classes = max_index + 1;
    ds.label_names.assign(static_cast<std::size_t>(ds.num_classes), "");
    for (const auto& [name, idx] : map) ds.label_names[static_cast<std::size_t>(idx)] = name;
    for (RawRecord& r : raw) {
      const auto it = map.find(r.str_label);
      if (it == map.end())
        raise(Errc::unknown_label, "load_dataset: unknown label '" + r.str_label + "'");
      ds.examples.push_back({std::move(r.id), std::move(r.text_a), std::move(r.text_b), it->second});
    }
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), Errc::io_error, "save_dataset: cannot open " + path.string());
  for (const Example& e : ds.examples) {
    nlohmann::json j{{"id", e.id}, {"text_a", e.text_a}};
    if (e.text_b) j["text_b"] = *e.text_b;
    j["label"] = ds.label_names[static_cast<std::size_t>(e.label)];
    out << j.dump() << '\n';
  }
  require(out.good(), Errc::io_error, "save_dataset: write failed");
}

std::vector<std::size_t> stratified_counts(const std::vector<double>& distribution,
                                           std::size_t n) {
  const std::size_t c = distribution.size();
  std::vector<std::size_t> counts(c, 0);
  std::vector<double> remainder(c, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double quota = distribution[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  // distribute leftovers by largest remainder, lower index wins ties
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < c; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k) {
    ++counts[order[k % c]];
    ++assigned;
  }
  // minimum 1 per present class, taken from the largest class
  for (std::size_t i = 0; i < c; ++i) {
    if (distribution[i] <= 0.0 || counts[i] > 0) continue;
    std::size_t donor = c;
    for (std::size_t j = 0; j < c; ++j)
      if (counts[j] >= 2 && (donor == c || counts[j] > counts[donor])) donor = j;
    require(donor != c, Errc::too_few_examples,
            "stratified_counts: cannot give every class at least one example");
    --counts[donor];
    ++counts[i];
  }
  return counts;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  return by_class;
}

// Uniform without replacement: take `k` of `pool` (seeded), returned in
// original dataset order.
std::vector<std::size_t> draw_without_replacement(const std::vector<std::size_t>& pool,
                                                  std::size_t k, Rng& rng) {
  std::vector<std::size_t> shuffled = pool;
  rng.shuffle(shuffled);
  std::vector<std::size_t> picked(shuffled.begin(), shuffled.begin() + static_cast<long>(k));
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

Dataset stratified_sample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  require(!ds.empty(), Errc::empty_dataset, "stratified_sample: empty dataset");
  require(n <= ds.size(), Errc::too_few_examples, "stratified_sample: n exceeds dataset size");
  const auto by_class = indices_by_class(ds);
  std::size_t present = 0;
  for (const auto& idx : by_class) present += idx.empty() ? 0 : 1;
  require(n >= present, Errc::too_few_examples,
          "stratified_sample: n smaller than the number of classes");

  const auto counts = stratified_counts(ds.label_distribution(), n);
  Rng rng(seed);
  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    require(counts[c] <= by_class[c].size(), Errc::too_few_examples,
            "stratified_sample: class " + std::to_string(c) + " exhausted");
    if (counts[c] == 0) continue;
    const auto picked = draw_without_replacement(by_class[c], counts[c], rng);
    selected.insert(selected.end(), picked.begin(), picked.end());
  }
  return ds.subset(selected);
}

Dataset sample_per_class(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
  require(!ds.empty(), Errc::empty_dataset, "sample_per_class: empty dataset");
  const auto by_class = indices_by_class(ds);
  Rng rng(seed);
  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    require(per_class <= by_class[c].size(), Errc::too_few_examples,
            "sample_per_class: class " + std::to_string(c) + " has too few examples");
    const auto picked = draw_without_replacement(by_class[c], per_class, rng);
    selected.insert(selected.end(), picked.begin(), picked.end());
  }
  return ds.subset(selected);
}

Splits make_splits(const Dataset& ds, const SplitSpec& spec) {
  require(!ds.empty(), Errc::empty_dataset, "make_splits: empty dataset");
  const std::size_t default_eval = std::min<std::size_t>(500, ds.size() / 10);
  const std::size_t val_n = spec.validation_size.value_or(default_eval);
  const std::size_t test_n = spec.test_size.value_or(default_eval);
  require(val_n + test_n <= ds.size(), Errc::too_few_examples,
          "make_splits: split sizes exceed dataset size");

  const auto dist = ds.label_distribution();
  const auto val_counts = stratified_counts(dist, val_n);
  const auto test_counts = stratified_counts(dist, test_n);

  const auto by_class = indices_by_class(ds);
  Rng rng(mix_seed(spec.seed, 0x5317));

  std::vector<std::size_t> val_idx, test_idx, train_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    require(val_counts[c] + test_counts[c] <= by_class[c].size(), Errc::too_few_examples,
            "make_splits: class " + std::to_string(c) + " exhausted");
    std::vector<std::size_t> pool = by_class[c];
    rng.shuffle(pool);
    val_idx.insert(val_idx.end(), pool.begin(), pool.begin() + static_cast<long>(val_counts[c]));
    test_idx.insert(test_idx.end(), pool.begin() + static_cast<long>(val_counts[c]),
                    pool.begin() + static_cast<long>(val_counts[c] + test_counts[c]));
    train_idx.insert(train_idx.end(), pool.begin() + static_cast<long>(val_counts[c] + test_counts[c]),
                     pool.end());
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return Splits{ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)};
}

void NoiseChannelConfig::validate() const {
  require(temperature >= 0.0, Errc::invalid_argument, "NoiseChannelConfig: temperature < 0");
  require(ratio >= 1, Errc::invalid_argument, "NoiseChannelConfig: ratio must be >= 1");
  require(max_corruption >= 0.0 && max_corruption <= 1.0, Errc::invalid_argument,
          "NoiseChannelConfig: max_corruption outside [0, 1]");
}

namespace {

std::vector<std::string> dataset_vocabulary(const Dataset& ds) {
  std::set<std::string> vocab;
  for (const Example& e : ds.examples) {
    for (auto& t : whitespace_tokenize(e.text_a)) vocab.insert(std::move(t));
    if (e.text_b)
      for (auto& t : whitespace_tokenize(*e.text_b)) vocab.insert(std::move(t));
  }
  return {vocab.begin(), vocab.end()};
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string corrupt_text(const std::string& text, double p,
                         const std::vector<std::string>& vocab, Rng& rng, AugmentStats* stats) {
  const std::vector<std::string> tokens = whitespace_tokenize(text);
  if (stats != nullptr) stats->tokens_seen += tokens.size();
  if (p <= 0.0) return text;

  std::vector<std::string> out;
  out.reserve(tokens.size() + 4);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!rng.bernoulli(p)) {
      out.push_back(tokens[i]);
      continue;
    }
    const std::uint64_t op = rng.below(4);
    bool applied = true;
    switch (op) {
      case 0:  // delete, unless it would leave the text empty
        if (out.empty() && i + 1 == tokens.size()) {
          out.push_back(tokens[i]);
          applied = false;
        }
        break;
      case 1:  // duplicate
        out.push_back(tokens[i]);
        out.push_back(tokens[i]);
        break;
      case 2:  // swap with the preceding emitted token
        out.push_back(tokens[i]);
        if (out.size() >= 2) {
          std::swap(out[out.size() - 1], out[out.size() - 2]);
        } else {
          applied = false;
        }
        break;
      default:  // replace with a random vocabulary token
        out.push_back(vocab[static_cast<std::size_t>(rng.below(vocab.size()))]);
        break;
    }
    if (applied && stats != nullptr) ++stats->tokens_corrupted;
  }
  return join_tokens(out);
}

}  // namespace

Dataset augment_noise(const Dataset& ds, const NoiseChannelConfig& cfg, AugmentStats* stats) {
  cfg.validate();
  require(!ds.empty(), Errc::empty_dataset, "augment_noise: empty dataset");

  const double p = std::min(cfg.temperature, 1.0) * cfg.max_corruption;
  const std::vector<std::string> vocab = dataset_vocabulary(ds);
  Rng rng(cfg.seed);

  Dataset out;
  out.num_classes = ds.num_classes;
  out.label_names = ds.label_names;
  out.examples.reserve(ds.size() * (cfg.ratio + 1));
  for (const Example& e : ds.examples) {
    out.examples.push_back(e);
    for (std::size_t k = 1; k <= cfg.ratio; ++k) {
      Example aug;
      aug.id = e.id + "-aug" + std::to_string(k);
      aug.label = e.label;
      aug.text_a = corrupt_text(e.text_a, p, vocab, rng, stats);
      if (e.text_b) aug.text_b = corrupt_text(*e.text_b, p, vocab, rng, stats);
      out.examples.push_back(std::move(aug));
    }
  }
  return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  require(spec.classes >= 2, Errc::invalid_argument, "make_synthetic_dataset: need >= 2 classes");
  require(spec.examples >= static_cast<std::size_t>(spec.classes), Errc::invalid_argument,
          "make_synthetic_dataset: fewer examples than classes");
  require(spec.vocab_per_class >= 1 && spec.tokens_per_example >= 1, Errc::invalid_argument,
          "make_synthetic_dataset: empty vocabulary or empty examples");
  require(spec.class_token_prob >= 1.0 || spec.shared_vocab >= 1, Errc::invalid_argument,
          "make_synthetic_dataset: shared pool required when class_token_prob < 1");

  Rng rng(spec.seed);
  Dataset ds;
  ds.num_classes = spec.classes;
  for (int c = 0; c < spec.classes; ++c) ds.label_names.push_back("class" + std::to_string(c));

  char idbuf[32];
  for (std::size_t i = 0; i < spec.examples; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
    std::vector<std::string> tokens;
    tokens.reserve(spec.tokens_per_example);
    for (std::size_t t = 0; t < spec.tokens_per_example; ++t) {
      if (rng.uniform01() < spec.class_token_prob) {
        tokens.push_back("c" + std::to_string(label) + "t" +
                         std::to_string(rng.below(spec.vocab_per_class)));
      } else {
        tokens.push_back("s" + std::to_string(rng.below(spec.shared_vocab)));
      }
    }
    std::snprintf(idbuf, sizeof(idbuf), "synth-%05zu", i);
    ds.examples.push_back({idbuf, join_tokens(tokens), std::nullopt, label});
  }
  return ds;
}

}  // namespace sclft
