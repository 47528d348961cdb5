#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbqa/tensor.hpp"
#include "kbqa/vocabulary.hpp"

namespace kbqa {

enum class PoolingMode { kTmp, kAmp, kOwaAbcnn, kOwaHabcnn, kOwaApcnn };

std::optional<PoolingMode> parse_pooling_mode(std::string_view name);
std::string_view to_string(PoolingMode mode);

struct PoolingConfig {
  PoolingMode mode = PoolingMode::kAmp;
  /// Number of most-similar n-grams kept by OWA-HABCNN.
  std::size_t top_k = 3;
};

struct ModelDims {
  std::size_t d_word = 500;
  std::size_t d_char = 100;
  std::size_t word_width = 3;
  std::size_t char_width = 3;
};

/// Parameters of both matchers. Each matcher owns one convolution shared by
/// its two towers: entity and mention go through the char convolution,
/// predicate and pattern through the word convolution.
template <typename T>
class BasicMatchModel {
 public:
  BasicMatchModel(Vocabulary words, Vocabulary chars, ModelDims dims,
                  PoolingConfig pooling, std::uint64_t seed,
                  bool sparse_embeddings = true);

  BasicParameter<T> char_embed;
  BasicParameter<T> char_conv_w;
  BasicParameter<T> char_conv_b;
  BasicParameter<T> word_embed;
  BasicParameter<T> word_conv_w;
  BasicParameter<T> word_conv_b;
  /// Only allocated for OWA-APCNN.
  std::optional<BasicParameter<T>> bilinear;

  std::vector<BasicParameter<T>*> parameters();
  std::vector<const BasicParameter<T>*> parameters() const;

  const Vocabulary& words() const { return words_; }
  const Vocabulary& chars() const { return chars_; }
  const ModelDims& dims() const { return dims_; }
  const PoolingConfig& pooling() const { return pooling_; }
  std::uint32_t entity_marker() const { return entity_marker_; }

  std::vector<std::uint32_t> encode_chars(std::string_view text) const;
  std::vector<std::uint32_t> encode_words(
      std::span<const std::string> tokens) const;

  /// Same architecture and values in another precision (used for 64-bit
  /// gradient checks). Accumulators are copied too.
  template <typename U>
  BasicMatchModel<U> cast() const;

 private:
  template <typename U>
  friend class BasicMatchModel;
  BasicMatchModel() = default;

  Vocabulary words_;
  Vocabulary chars_;
  ModelDims dims_;
  PoolingConfig pooling_;
  std::uint32_t entity_marker_ = 0;
};

using MatchModel = BasicMatchModel<float>;

/// Cosines to decay values: nonpositive entries become 0 and positive entries
/// are divided by the largest one. When no cosine is positive every decay is
/// 1, which turns attentive maxpooling into plain maxpooling.
template <typename T>
std::vector<T> decay_weights(std::span<const T> cosines);

template <typename T>
struct AmpResult {
  std::vector<T> values;
  std::vector<std::size_t> columns;
  std::vector<T> decay;
};

/// Attentive maxpooling over a pattern feature map (d x m) guided by a
/// predicate vector: the per-row argmax of the decay-weighted map picks a
/// column, and the original feature value at that coordinate is returned.
template <typename T>
AmpResult<T> attentive_maxpool(const BasicMatrix<T>& pattern,
                               std::span<const T> predicate);

template <typename T>
struct OwaWeights {
  std::vector<T> scores;
  /// OWA-HABCNN only: most similar columns, best first.
  std::vector<std::size_t> top_k;
};

/// Attention scores of each pattern column for the one-way-attention
/// baselines: cosine for ABCNN/HABCNN, tanh(v^T U f_i) for APCNN.
template <typename T>
OwaWeights<T> owa_attention_weights(const BasicMatrix<T>& pattern,
                                    std::span<const T> predicate,
                                    const PoolingConfig& pooling,
                                    const BasicMatrix<T>* bilinear = nullptr);

/// Entity-mention match m_e on the tape: cosine of the max-pooled char-CNN
/// representations. Throws std::invalid_argument on empty input.
template <typename T>
VarId char_match(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 std::span<const std::uint32_t> entity,
                 std::span<const std::uint32_t> mention);

/// Predicate-pattern match m_r on the tape under the given pooling. Throws
/// std::invalid_argument when the pattern has no entity marker.
template <typename T>
VarId word_match(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 std::span<const std::uint32_t> predicate,
                 std::span<const std::uint32_t> pattern,
                 const PoolingConfig& pooling);

/// Pooled pattern vector for the given mode (exposed for invariant checks).
template <typename T>
std::vector<T> pattern_vector(BasicMatchModel<T>& model,
                              std::span<const std::uint32_t> predicate,
                              std::span<const std::uint32_t> pattern,
                              const PoolingConfig& pooling);

// Inference helpers. The tape is local and never differentiated, so the
// model is not modified.
float char_match(const MatchModel& model, std::string_view entity_name,
                 std::string_view mention);
float word_match(const MatchModel& model,
                 std::span<const std::string> predicate_tokens,
                 std::span<const std::string> pattern_tokens,
                 const PoolingConfig& pooling);

/// Writes `path` (checkpoint) plus `path`.hparams, `path`.words and
/// `path`.chars. `extra` lands in the hparams sidecar.
void save_model(const std::filesystem::path& path, const MatchModel& model,
                const std::map<std::string, std::string>& extra = {});

struct LoadedModel {
  MatchModel model;
  std::map<std::string, std::string> hparams;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace kbqa
