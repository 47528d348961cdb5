#include "kbqa/matchers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kbqa/checkpoint.hpp"
#include "kbqa/entity_linker.hpp"

namespace kbqa {

std::optional<PoolingMode> parse_pooling_mode(std::string_view name) {
  if (name == "tmp" || name == "TMP") return PoolingMode::kTmp;
  if (name == "amp" || name == "AMP") return PoolingMode::kAmp;
  if (name == "abcnn" || name == "owa-abcnn") return PoolingMode::kOwaAbcnn;
  if (name == "habcnn" || name == "owa-habcnn") return PoolingMode::kOwaHabcnn;
  if (name == "apcnn" || name == "owa-apcnn") return PoolingMode::kOwaApcnn;
  return std::nullopt;
}

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kTmp: return "tmp";
    case PoolingMode::kAmp: return "amp";
    case PoolingMode::kOwaAbcnn: return "owa-abcnn";
    case PoolingMode::kOwaHabcnn: return "owa-habcnn";
    case PoolingMode::kOwaApcnn: return "owa-apcnn";
  }
  return "amp";
}

// --- Model -----------------------------------------------------------------

template <typename T>
BasicMatchModel<T>::BasicMatchModel(Vocabulary words, Vocabulary chars,
                                    ModelDims dims, PoolingConfig pooling,
                                    std::uint64_t seed, bool sparse_embeddings)
    : words_(std::move(words)),
      chars_(std::move(chars)),
      dims_(dims),
      pooling_(pooling) {
  if (dims_.d_word == 0 || dims_.d_char == 0 || dims_.word_width == 0 ||
      dims_.char_width == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  entity_marker_ = words_.add(kEntityMarker);

  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t rows, std::size_t cols, double bound) {
    BasicMatrix<T> m(rows, cols);
    init_uniform(m, bound, rng);
    return m;
  };
  const auto conv_bound = [](std::size_t width, std::size_t d) {
    return std::sqrt(1.0 / static_cast<double>(width * d));
  };
  const auto dc = dims_.d_char;
  const auto dw = dims_.d_word;

  char_embed = BasicParameter<T>("char_embed", uniform(dc, chars_.size(), 0.01),
                                 sparse_embeddings);
  char_conv_w = BasicParameter<T>(
      "char_conv_w",
      uniform(dc, dims_.char_width * dc, conv_bound(dims_.char_width, dc)),
      false, true);
  char_conv_b = BasicParameter<T>("char_conv_b", BasicMatrix<T>(dc, 1));
  word_embed = BasicParameter<T>("word_embed", uniform(dw, words_.size(), 0.01),
                                 sparse_embeddings);
  word_conv_w = BasicParameter<T>(
      "word_conv_w",
      uniform(dw, dims_.word_width * dw, conv_bound(dims_.word_width, dw)),
      false, true);
  word_conv_b = BasicParameter<T>("word_conv_b", BasicMatrix<T>(dw, 1));
  if (pooling_.mode == PoolingMode::kOwaApcnn) {
    bilinear.emplace("bilinear", uniform(dw, dw, conv_bound(1, dw)));
  }
}

template <typename T>
std::vector<BasicParameter<T>*> BasicMatchModel<T>::parameters() {
  std::vector<BasicParameter<T>*> out{&char_embed,  &char_conv_w,
                                      &char_conv_b, &word_embed,
                                      &word_conv_w, &word_conv_b};
  if (bilinear) out.push_back(&*bilinear);
  return out;
}

template <typename T>
std::vector<const BasicParameter<T>*> BasicMatchModel<T>::parameters() const {
  std::vector<const BasicParameter<T>*> out{&char_embed,  &char_conv_w,
                                            &char_conv_b, &word_embed,
                                            &word_conv_w, &word_conv_b};
  if (bilinear) out.push_back(&*bilinear);
  return out;
}

template <typename T>
std::vector<std::uint32_t> BasicMatchModel<T>::encode_chars(
    std::string_view text) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(text.size());
  for (const char c : text) ids.push_back(chars_.lookup(std::string_view(&c, 1)));
  return ids;
}

template <typename T>
std::vector<std::uint32_t> BasicMatchModel<T>::encode_words(
    std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(words_.lookup(t));
  return ids;
}

template <typename T>
template <typename U>
BasicMatchModel<U> BasicMatchModel<T>::cast() const {
  BasicMatchModel<U> out;
  out.words_ = words_;
  out.chars_ = chars_;
  out.dims_ = dims_;
  out.pooling_ = pooling_;
  out.entity_marker_ = entity_marker_;
  out.char_embed = char_embed.template cast<U>();
  out.char_conv_w = char_conv_w.template cast<U>();
  out.char_conv_b = char_conv_b.template cast<U>();
  out.word_embed = word_embed.template cast<U>();
  out.word_conv_w = word_conv_w.template cast<U>();
  out.word_conv_b = word_conv_b.template cast<U>();
  if (bilinear) out.bilinear = bilinear->template cast<U>();
  return out;
}

// --- Pooling ---------------------------------------------------------------

template <typename T>
std::vector<T> decay_weights(std::span<const T> cosines) {
  T largest{0};
  for (const auto c : cosines) largest = std::max(largest, c);
  std::vector<T> out(cosines.size(), T{1});
  if (!(largest > T{0})) return out;
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    out[i] = cosines[i] > T{0} ? cosines[i] / largest : T{0};
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> column_cosines(const BasicMatrix<T>& f,
                              std::span<const T> v) {
  if (v.size() != f.rows()) {
    throw std::invalid_argument(fmt::format(
        "predicate vector of length {} against {} feature rows", v.size(),
        f.rows()));
  }
  std::vector<T> out(f.cols());
  for (std::size_t c = 0; c < f.cols(); ++c) {
    const auto col = f.column(c);
    out[c] = cosine_similarity<T>(v, col);
  }
  return out;
}

}  // namespace

template <typename T>
AmpResult<T> attentive_maxpool(const BasicMatrix<T>& pattern,
                               std::span<const T> predicate) {
  if (pattern.cols() == 0) {
    throw std::invalid_argument("attentive maxpooling over zero columns");
  }
  const auto cosines = column_cosines(pattern, predicate);
  AmpResult<T> out;
  out.decay = decay_weights<T>(cosines);
  out.values.resize(pattern.rows());
  out.columns.resize(pattern.rows());
  for (std::size_t r = 0; r < pattern.rows(); ++r) {
    std::size_t best = 0;
    T best_value = pattern(r, 0) * out.decay[0];
    for (std::size_t c = 1; c < pattern.cols(); ++c) {
      const T v = pattern(r, c) * out.decay[c];
      if (v > best_value) {
        best_value = v;
        best = c;
      }
    }
    out.columns[r] = best;
    out.values[r] = pattern(r, best);
  }
  return out;
}

template <typename T>
OwaWeights<T> owa_attention_weights(const BasicMatrix<T>& pattern,
                                    std::span<const T> predicate,
                                    const PoolingConfig& pooling,
                                    const BasicMatrix<T>* bilinear) {
  OwaWeights<T> out;
  switch (pooling.mode) {
    case PoolingMode::kOwaAbcnn:
    case PoolingMode::kOwaHabcnn:
      out.scores = column_cosines(pattern, predicate);
      break;
    case PoolingMode::kOwaApcnn: {
      if (bilinear == nullptr) {
        throw std::invalid_argument("OWA-APCNN needs a bilinear matrix");
      }
      const auto d = pattern.rows();
      std::vector<T> r(d, T{0});
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) r[j] += predicate[i] * (*bilinear)(i, j);
      }
      out.scores.resize(pattern.cols());
      for (std::size_t c = 0; c < pattern.cols(); ++c) {
        T z{0};
        for (std::size_t j = 0; j < d; ++j) z += r[j] * pattern(j, c);
        out.scores[c] = std::tanh(z);
      }
      break;
    }
    default:
      throw std::invalid_argument("attention weights only exist for OWA modes");
  }
  if (pooling.mode == PoolingMode::kOwaHabcnn) {
    if (pooling.top_k == 0) throw std::invalid_argument("top_k must be >= 1");
    std::vector<std::size_t> order(out.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.scores[a] > out.scores[b];
    });
    order.resize(std::min(order.size(), pooling.top_k));
    out.top_k = std::move(order);
  }
  return out;
}

// --- Towers ----------------------------------------------------------------

namespace {

template <typename T>
VarId encode_tower(BasicTape<T>& tape, BasicParameter<T>& table,
                   BasicParameter<T>& w, BasicParameter<T>& b,
                   std::span<const std::uint32_t> ids, std::size_t width) {
  const auto x = embed(tape, table, ids);
  return conv_tanh(tape, w, b, x, width);
}

template <typename T>
void require_marker(std::span<const std::uint32_t> pattern,
                    std::uint32_t marker) {
  if (std::find(pattern.begin(), pattern.end(), marker) == pattern.end()) {
    throw std::invalid_argument("pattern has no entity marker <e>");
  }
}

template <typename T>
std::pair<VarId, VarId> pooled_pair(BasicTape<T>& tape,
                                    BasicMatchModel<T>& model,
                                    std::span<const std::uint32_t> predicate,
                                    std::span<const std::uint32_t> pattern,
                                    const PoolingConfig& pooling) {
  if (predicate.empty()) throw std::invalid_argument("empty predicate");
  require_marker<T>(pattern, model.entity_marker());
  const auto width = model.dims().word_width;
  const auto fp = encode_tower(tape, model.word_embed, model.word_conv_w,
                               model.word_conv_b, predicate, width);
  const auto fq = encode_tower(tape, model.word_embed, model.word_conv_w,
                               model.word_conv_b, pattern, width);
  switch (pooling.mode) {
    case PoolingMode::kTmp: {
      const auto vp = maxpool_rows(tape, fp);
      return {vp, maxpool_rows(tape, fq)};
    }
    case PoolingMode::kAmp: {
      const auto vp = maxpool_rows(tape, fp);
      const auto amp = attentive_maxpool<T>(tape.value(fq), tape.value(vp).data());
      return {vp, select_per_row(tape, fq,
                                 std::span<const std::size_t>(amp.columns))};
    }
    case PoolingMode::kOwaAbcnn: {
      const auto vp = mean_columns(tape, fp);
      const auto scores = cosine_columns(tape, vp, fq);
      return {vp, weighted_mean_columns(tape, fq, relu(tape, scores))};
    }
    case PoolingMode::kOwaHabcnn: {
      const auto vp = maxpool_rows(tape, fp);
      const auto w = owa_attention_weights<T>(tape.value(fq),
                                              tape.value(vp).data(), pooling);
      const auto top = select_columns(
          tape, fq, std::span<const std::size_t>(w.top_k));
      return {vp, maxpool_rows(tape, top)};
    }
    case PoolingMode::kOwaApcnn: {
      if (!model.bilinear) {
        throw std::invalid_argument("model has no bilinear form for OWA-APCNN");
      }
      const auto vp = mean_columns(tape, fp);
      const auto scores = bilinear_tanh_scores(tape, vp, *model.bilinear, fq);
      return {vp, weighted_mean_columns(tape, fq, relu(tape, scores))};
    }
  }
  throw std::invalid_argument("unknown pooling mode");
}

}  // namespace

template <typename T>
VarId char_match(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 std::span<const std::uint32_t> entity,
                 std::span<const std::uint32_t> mention) {
  if (entity.empty() || mention.empty()) {
    throw std::invalid_argument("char_match needs nonempty strings");
  }
  const auto width = model.dims().char_width;
  const auto fe = encode_tower(tape, model.char_embed, model.char_conv_w,
                               model.char_conv_b, entity, width);
  const auto fm = encode_tower(tape, model.char_embed, model.char_conv_w,
                               model.char_conv_b, mention, width);
  return cosine(tape, maxpool_rows(tape, fe), maxpool_rows(tape, fm));
}

template <typename T>
VarId word_match(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 std::span<const std::uint32_t> predicate,
                 std::span<const std::uint32_t> pattern,
                 const PoolingConfig& pooling) {
  const auto [vp, vq] = pooled_pair(tape, model, predicate, pattern, pooling);
  return cosine(tape, vp, vq);
}

template <typename T>
std::vector<T> pattern_vector(BasicMatchModel<T>& model,
                              std::span<const std::uint32_t> predicate,
                              std::span<const std::uint32_t> pattern,
                              const PoolingConfig& pooling) {
  BasicTape<T> tape;
  const auto [vp, vq] = pooled_pair(tape, model, predicate, pattern, pooling);
  const auto data = tape.value(vq).data();
  return {data.begin(), data.end()};
}

float char_match(const MatchModel& model, std::string_view entity_name,
                 std::string_view mention) {
  Tape tape;
  // Forward only: no backward() runs on this tape.
  auto& m = const_cast<MatchModel&>(model);
  const auto e = model.encode_chars(entity_name);
  const auto q = model.encode_chars(mention);
  return tape.scalar(char_match(tape, m, e, q));
}

float word_match(const MatchModel& model,
                 std::span<const std::string> predicate_tokens,
                 std::span<const std::string> pattern_tokens,
                 const PoolingConfig& pooling) {
  Tape tape;
  auto& m = const_cast<MatchModel&>(model);
  const auto p = model.encode_words(predicate_tokens);
  const auto q = model.encode_words(pattern_tokens);
  return tape.scalar(word_match(tape, m, p, q, pooling));
}

// --- Persistence -----------------------------------------------------------

namespace {

std::filesystem::path sidecar(const std::filesystem::path& path,
                              std::string_view suffix) {
  auto p = path;
  p += suffix;
  return p;
}

std::size_t to_size(const std::map<std::string, std::string>& kv,
                    const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    throw CheckpointError(fmt::format("hparams missing '{}'", key));
  }
  return static_cast<std::size_t>(std::stoull(it->second));
}

}  // namespace

void save_model(const std::filesystem::path& path, const MatchModel& model,
                const std::map<std::string, std::string>& extra) {
  const auto params = model.parameters();
  save_checkpoint(path, params);

  std::map<std::string, std::string> kv = extra;
  kv["d_word"] = std::to_string(model.dims().d_word);
  kv["d_char"] = std::to_string(model.dims().d_char);
  kv["word_width"] = std::to_string(model.dims().word_width);
  kv["char_width"] = std::to_string(model.dims().char_width);
  kv["pooling"] = std::string(to_string(model.pooling().mode));
  kv["top_k"] = std::to_string(model.pooling().top_k);
  std::ofstream hp(sidecar(path, ".hparams"));
  for (const auto& [k, v] : kv) hp << k << '=' << v << '\n';

  std::ofstream words(sidecar(path, ".words"));
  model.words().save(words);
  std::ofstream chars(sidecar(path, ".chars"), std::ios::binary);
  model.chars().save(chars);
  if (!hp || !words || !chars) {
    throw CheckpointError(fmt::format("cannot write sidecars of {}", path.string()));
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  {
    std::ifstream hp(sidecar(path, ".hparams"));
    if (!hp) throw CheckpointError("missing hparams sidecar for " + path.string());
    std::string line;
    while (std::getline(hp, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  std::ifstream wf(sidecar(path, ".words"));
  std::ifstream cf(sidecar(path, ".chars"), std::ios::binary);
  if (!wf || !cf) throw CheckpointError("missing vocabulary sidecar for " + path.string());
  auto words = Vocabulary::load(wf);
  auto chars = Vocabulary::load(cf);

  ModelDims dims{to_size(kv, "d_word"), to_size(kv, "d_char"),
                 to_size(kv, "word_width"), to_size(kv, "char_width")};
  PoolingConfig pooling;
  const auto mode = parse_pooling_mode(kv.count("pooling") ? kv["pooling"] : "");
  if (!mode) throw CheckpointError("hparams has an unknown pooling mode");
  pooling.mode = *mode;
  pooling.top_k = to_size(kv, "top_k");

  MatchModel model(std::move(words), std::move(chars), dims, pooling, 0);
  const auto params = model.parameters();
  load_checkpoint(path, params);
  return LoadedModel{std::move(model), std::move(kv)};
}

// --- Instantiations --------------------------------------------------------

#define KBQA_INSTANTIATE_MATCHERS(T)                                          \
  template class BasicMatchModel<T>;                                          \
  template std::vector<T> decay_weights<T>(std::span<const T>);               \
  template AmpResult<T> attentive_maxpool<T>(const BasicMatrix<T>&,           \
                                             std::span<const T>);             \
  template OwaWeights<T> owa_attention_weights<T>(                            \
      const BasicMatrix<T>&, std::span<const T>, const PoolingConfig&,        \
      const BasicMatrix<T>*);                                                 \
  template VarId char_match<T>(BasicTape<T>&, BasicMatchModel<T>&,            \
                               std::span<const std::uint32_t>,                \
                               std::span<const std::uint32_t>);               \
  template VarId word_match<T>(BasicTape<T>&, BasicMatchModel<T>&,            \
                               std::span<const std::uint32_t>,                \
                               std::span<const std::uint32_t>,                \
                               const PoolingConfig&);                         \
  template std::vector<T> pattern_vector<T>(                                  \
      BasicMatchModel<T>&, std::span<const std::uint32_t>,                    \
      std::span<const std::uint32_t>, const PoolingConfig&);

KBQA_INSTANTIATE_MATCHERS(float)
KBQA_INSTANTIATE_MATCHERS(double)

template BasicMatchModel<double> BasicMatchModel<float>::cast<double>() const;
template BasicMatchModel<float> BasicMatchModel<double>::cast<float>() const;
template BasicMatchModel<float> BasicMatchModel<float>::cast<float>() const;

#undef KBQA_INSTANTIATE_MATCHERS

}  // namespace kbqa
