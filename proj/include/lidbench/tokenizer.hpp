#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lidbench/encoding.hpp"
#include "lidbench/graph.hpp"

namespace lidbench {

/// Splits text into the pre-token pieces of the cl100k pattern (also used by
/// the Llama 3 tokenizer). Returned spans are byte ranges into `text`.
std::vector<CharSpan> pretokenize(std::string_view text);

class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual const std::string& id() const = 0;
    /// Content hash of the vocabulary, recorded in run manifests.
    virtual const std::string& vocabulary_hash() const = 0;

    /// Byte offset at which each token starts. Strictly increasing; the first
    /// entry is 0 for non-empty text.
    virtual std::vector<std::size_t> token_starts(std::string_view text) const = 0;

    std::size_t count(std::string_view text) const { return token_starts(text).size(); }
};

/// Byte-level BPE over a tiktoken-format rank file ("<base64 token> <rank>"
/// per line). Special tokens are not recognised; all input is plain text.
class BpeTokenizer final : public Tokenizer {
public:
    static std::unique_ptr<BpeTokenizer> from_file(const std::filesystem::path& path,
                                                   std::string id);

    const std::string& id() const override { return id_; }
    const std::string& vocabulary_hash() const override { return hash_; }
    std::vector<std::size_t> token_starts(std::string_view text) const override;

    std::size_t vocabulary_size() const { return ranks_.size(); }
    /// Token ids for `text`, mainly for cross-checking against reference encoders.
    std::vector<std::uint32_t> encode(std::string_view text) const;

private:
    BpeTokenizer() = default;
    void merge_piece(std::string_view piece, std::size_t offset, std::vector<std::size_t>& starts,
                     std::vector<std::uint32_t>* ids) const;
    std::optional<std::uint32_t> rank_of(std::string_view bytes) const;

    std::string id_;
    std::string hash_;
    std::unordered_map<std::string, std::uint32_t> ranks_;
};

/// Treats every pre-token piece as one token. Needs no vocabulary; a close
/// approximation of cl100k for ASCII graph prompts.
class PretokenTokenizer final : public Tokenizer {
public:
    const std::string& id() const override { return id_; }
    const std::string& vocabulary_hash() const override { return hash_; }
    std::vector<std::size_t> token_starts(std::string_view text) const override;

private:
    std::string id_ = "pretokens";
    std::string hash_ = "none";
};

/// Directory holding bundled vocabularies: $LIDBENCH_DATA_DIR when set,
/// else the build-time default.
std::filesystem::path default_data_dir();

/// Registered ids: "cl100k_base" (bundled rank file), "pretokens", and
/// "tiktoken:<path>" for any tiktoken-format rank file (e.g. a Llama 3
/// tokenizer.model). Loaded tokenizers are shared. Throws ConfigError.
std::shared_ptr<const Tokenizer> load_tokenizer(std::string_view id,
                                                const std::filesystem::path& data_dir =
                                                    default_data_dir());

/// Token segmentation of one text, queried by byte offset.
class TokenMap {
public:
    TokenMap() = default;
    TokenMap(std::string_view text, const Tokenizer& tokenizer);

    std::size_t token_count() const { return starts_.size(); }
    std::size_t text_size() const { return size_; }

    /// Number of tokens that start strictly before `offset`: 0 at offset 0,
    /// token_count() at text_size(), non-decreasing in between.
    std::size_t char_to_token(std::size_t offset) const;

    /// Index of the token covering byte `offset` (offset < text_size()).
    std::size_t token_at(std::size_t offset) const;

private:
    std::vector<std::size_t> starts_;
    std::size_t size_ = 0;
};

/// Tokens separating two occurrences: index of the token holding the first
/// byte of `second` minus index of the first token that starts at or after
/// the end of `first`, floored at 0. Throws ParameterError when the spans
/// overlap or are out of order.
std::size_t occurrence_distance(const TokenMap& map, CharSpan first, CharSpan second);

/// Median with half-up rounding for even counts; nullopt when empty.
std::optional<std::size_t> median_of(std::vector<std::size_t> values);

/// One common node's rendered edge in each of two subgraph blocks.
struct CommonOccurrence {
    NodeId node = 0;
    CharSpan first;
    CharSpan second;
};

/// Median of per-node occurrence distances; nullopt ("undefined distance")
/// when there are no common nodes.
std::optional<std::size_t> median_common_distance(const TokenMap& map,
                                                  std::span<const CommonOccurrence> common);

enum class DistanceLabel { small, medium, large };

inline constexpr DistanceLabel kAllDistanceLabels[] = {DistanceLabel::small, DistanceLabel::medium,
                                                       DistanceLabel::large};

std::string_view to_string(DistanceLabel label);
DistanceLabel distance_label_from_string(std::string_view name);

/// Inclusive upper bounds of the Small and Medium groups.
struct BucketThresholds {
    std::size_t small_max = 0;
    std::size_t medium_max = 0;

    bool operator==(const BucketThresholds&) const = default;
};

/// Defaults: incident 219/399, adjacency 425/785, expert 354/654 tokens.
BucketThresholds default_thresholds(Encoding encoding);

struct DistanceBucket {
    Encoding encoding = Encoding::incident;
    DistanceLabel label = DistanceLabel::small;
    std::optional<std::size_t> lower;  // exclusive; nullopt = unbounded
    std::optional<std::size_t> upper;  // inclusive; nullopt = unbounded
};

/// The three buckets partitioning [0, inf) for one encoding.
std::vector<DistanceBucket> distance_buckets(Encoding encoding, const BucketThresholds& t);

DistanceLabel bucketize(std::size_t distance, const BucketThresholds& t);
inline DistanceLabel bucketize(std::size_t distance, Encoding encoding) {
    return bucketize(distance, default_thresholds(encoding));
}

}  // namespace lidbench
