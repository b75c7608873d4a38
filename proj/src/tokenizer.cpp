#include "lidbench/tokenizer.hpp"

#include <openssl/evp.h>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"

#ifndef LIDBENCH_DATA_DIR
#define LIDBENCH_DATA_DIR "data"
#endif

namespace lidbench {

namespace {

enum CharClass : std::uint8_t { kLetter = 1, kNumber = 2, kSpace = 4, kNewline = 8 };

struct CodePoint {
    std::size_t offset;  // byte offset of the first byte
    std::uint8_t cls;
    char32_t value;
};

std::uint8_t classify(UChar32 c) {
    if (c < 0x80) {
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return kLetter;
        if (c >= '0' && c <= '9') return kNumber;
        if (c == '\n' || c == '\r') return kSpace | kNewline;
        if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return kSpace;
        return 0;
    }
    if (c < 0) return 0;  // ill-formed UTF-8 byte
    const auto mask = U_GET_GC_MASK(c);
    std::uint8_t cls = 0;
    if (mask & U_GC_L_MASK) cls |= kLetter;
    if (mask & U_GC_N_MASK) cls |= kNumber;
    if (u_hasBinaryProperty(c, UCHAR_WHITE_SPACE)) cls |= kSpace;
    return cls;
}

std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> cps;
    cps.reserve(text.size());
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    std::int32_t i = 0;
    while (i < length) {
        const std::int32_t start = i;
        UChar32 c = 0;
        U8_NEXT(s, i, length, c);
        cps.push_back({static_cast<std::size_t>(start), classify(c), static_cast<char32_t>(c)});
    }
    return cps;
}

char32_t lower_ascii(char32_t c) { return (c >= 'A' && c <= 'Z') ? c + ('a' - 'A') : c; }

// End (exclusive, in code points) of the pre-token starting at i. Mirrors
//   '(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}++|\p{N}{1,3}+
//   | ?[^\s\p{L}\p{N}]++[\r\n]*+|\s++$|\s*[\r\n]|\s+(?!\S)|\s
// alternative by alternative, first match wins.
std::size_t match_at(const std::vector<CodePoint>& cp, std::size_t i) {
    const std::size_t n = cp.size();
    const auto is = [&](std::size_t k, std::uint8_t cls) { return k < n && (cp[k].cls & cls); };
    const auto is_other = [&](std::size_t k) {
        return k < n && !(cp[k].cls & (kLetter | kNumber | kSpace));
    };

    if (cp[i].value == U'\'' && i + 1 < n) {
        const char32_t a = lower_ascii(cp[i + 1].value);
        if (a == 's' || a == 'd' || a == 'm' || a == 't') return i + 2;
        if (i + 2 < n) {
            const char32_t b = lower_ascii(cp[i + 2].value);
            if ((a == 'l' && b == 'l') || (a == 'v' && b == 'e') || (a == 'r' && b == 'e')) {
                return i + 3;
            }
        }
    }

    {
        std::size_t j = i;
        if (!(cp[j].cls & (kNewline | kLetter | kNumber))) ++j;
        std::size_t k = j;
        while (is(k, kLetter)) ++k;
        if (k > j) return k;
    }

    if (cp[i].cls & kNumber) {
        std::size_t k = i;
        while (k < i + 3 && is(k, kNumber)) ++k;
        return k;
    }

    {
        std::size_t j = (cp[i].value == U' ') ? i + 1 : i;
        std::size_t k = j;
        while (is_other(k)) ++k;
        if (k > j) {
            while (k < n && (cp[k].cls & kNewline)) ++k;
            return k;
        }
    }

    if (cp[i].cls & kSpace) {
        std::size_t run_end = i;
        while (is(run_end, kSpace)) ++run_end;
        if (run_end == n) return n;
        for (std::size_t m = run_end; m > i; --m) {
            if (cp[m - 1].cls & kNewline) return m;
        }
        if (run_end - 1 > i) return run_end - 1;
        return i + 1;
    }

    return i + 1;  // unreachable for well-formed classes
}

int base64_decode(std::string_view in, std::string& out) {
    out.resize(3 * ((in.size() + 3) / 4));
    const int len = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                    reinterpret_cast<const unsigned char*>(in.data()),
                                    static_cast<int>(in.size()));
    if (len < 0) return len;
    int padding = 0;
    for (auto it = in.rbegin(); it != in.rend() && *it == '='; ++it) ++padding;
    out.resize(static_cast<std::size_t>(len - padding));
    return len - padding;
}

}  // namespace

std::vector<CharSpan> pretokenize(std::string_view text) {
    std::vector<CharSpan> pieces;
    if (text.empty()) return pieces;
    const auto cps = decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::size_t end = match_at(cps, i);
        const std::size_t byte_end = end < cps.size() ? cps[end].offset : text.size();
        pieces.push_back({cps[i].offset, byte_end});
        i = end;
    }
    return pieces;
}

std::unique_ptr<BpeTokenizer> BpeTokenizer::from_file(const std::filesystem::path& path,
                                                      std::string id) {
    const std::string contents = read_file(path);
    std::unique_ptr<BpeTokenizer> tok(new BpeTokenizer());
    tok->id_ = std::move(id);
    tok->hash_ = sha256_hex(contents);
    std::istringstream lines(contents);
    std::string line;
    std::string bytes;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto space = line.find(' ');
        if (space == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": missing rank");
        }
        if (base64_decode(std::string_view(line).substr(0, space), bytes) < 0) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad base64");
        }
        const auto rank = static_cast<std::uint32_t>(std::stoul(line.substr(space + 1)));
        tok->ranks_.emplace(bytes, rank);
    }
    if (tok->ranks_.size() < 256) {
        throw ConfigError(path.string() + " does not look like a byte-level BPE rank file");
    }
    return tok;
}

std::optional<std::uint32_t> BpeTokenizer::rank_of(std::string_view bytes) const {
    auto it = ranks_.find(std::string(bytes));
    if (it == ranks_.end()) return std::nullopt;
    return it->second;
}

void BpeTokenizer::merge_piece(std::string_view piece, std::size_t offset,
                               std::vector<std::size_t>& starts,
                               std::vector<std::uint32_t>* ids) const {
    if (auto whole = rank_of(piece)) {
        starts.push_back(offset);
        if (ids) ids->push_back(*whole);
        return;
    }
    // bounds[k] is the start of part k; the final entry is piece.size().
    std::vector<std::size_t> bounds(piece.size() + 1);
    for (std::size_t k = 0; k <= piece.size(); ++k) bounds[k] = k;
    constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
    const auto pair_rank = [&](std::size_t k) -> std::uint32_t {
        if (k + 2 >= bounds.size()) return kNone;
        auto r = rank_of(piece.substr(bounds[k], bounds[k + 2] - bounds[k]));
        return r ? *r : kNone;
    };
    std::vector<std::uint32_t> ranks(bounds.size(), kNone);
    for (std::size_t k = 0; k + 2 < bounds.size(); ++k) ranks[k] = pair_rank(k);

    while (bounds.size() > 2) {
        std::size_t best = 0;
        std::uint32_t best_rank = kNone;
        for (std::size_t k = 0; k + 2 < bounds.size(); ++k) {
            if (ranks[k] < best_rank) {
                best_rank = ranks[k];
                best = k;
            }
        }
        if (best_rank == kNone) break;
        bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(best) + 1);
        ranks.erase(ranks.begin() + static_cast<std::ptrdiff_t>(best) + 1);
        ranks[best] = pair_rank(best);
        if (best > 0) ranks[best - 1] = pair_rank(best - 1);
    }

    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
        starts.push_back(offset + bounds[k]);
        if (ids) {
            auto r = rank_of(piece.substr(bounds[k], bounds[k + 1] - bounds[k]));
            if (!r) throw Error("BPE vocabulary lacks a single-byte token");
            ids->push_back(*r);
        }
    }
}

std::vector<std::size_t> BpeTokenizer::token_starts(std::string_view text) const {
    std::vector<std::size_t> starts;
    starts.reserve(text.size() / 2);
    for (const auto& piece : pretokenize(text)) {
        merge_piece(text.substr(piece.begin, piece.size()), piece.begin, starts, nullptr);
    }
    return starts;
}

std::vector<std::uint32_t> BpeTokenizer::encode(std::string_view text) const {
    std::vector<std::size_t> starts;
    std::vector<std::uint32_t> ids;
    for (const auto& piece : pretokenize(text)) {
        merge_piece(text.substr(piece.begin, piece.size()), piece.begin, starts, &ids);
    }
    return ids;
}

std::vector<std::size_t> PretokenTokenizer::token_starts(std::string_view text) const {
    std::vector<std::size_t> starts;
    for (const auto& piece : pretokenize(text)) starts.push_back(piece.begin);
    return starts;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("LIDBENCH_DATA_DIR"); env && *env) return env;
    return LIDBENCH_DATA_DIR;
}

std::shared_ptr<const Tokenizer> load_tokenizer(std::string_view id,
                                                const std::filesystem::path& data_dir) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const Tokenizer>, std::less<>> loaded;

    std::filesystem::path file;
    if (id == "pretokens") {
        return std::make_shared<PretokenTokenizer>();
    } else if (id == "cl100k_base") {
        file = data_dir / "cl100k_base.tiktoken";
    } else if (id.starts_with("tiktoken:")) {
        file = std::string(id.substr(9));
    } else {
        throw ConfigError("unknown tokenizer id '" + std::string(id) + "'");
    }

    const std::string key = std::string(id) + "|" + file.string();
    std::lock_guard lock(mu);
    if (auto it = loaded.find(key); it != loaded.end()) return it->second;
    if (!std::filesystem::exists(file)) {
        throw ConfigError("tokenizer '" + std::string(id) + "': vocabulary file " + file.string() +
                          " not found");
    }
    std::shared_ptr<const Tokenizer> tok = BpeTokenizer::from_file(file, std::string(id));
    loaded.emplace(key, tok);
    return tok;
}

TokenMap::TokenMap(std::string_view text, const Tokenizer& tokenizer)
    : starts_(tokenizer.token_starts(text)), size_(text.size()) {}

std::size_t TokenMap::char_to_token(std::size_t offset) const {
    return static_cast<std::size_t>(
        std::lower_bound(starts_.begin(), starts_.end(), offset) - starts_.begin());
}

std::size_t TokenMap::token_at(std::size_t offset) const {
    if (offset >= size_) throw ParameterError("token_at: offset past end of text");
    return static_cast<std::size_t>(
               std::upper_bound(starts_.begin(), starts_.end(), offset) - starts_.begin()) -
           1;
}

std::size_t occurrence_distance(const TokenMap& map, CharSpan first, CharSpan second) {
    if (first.end > map.text_size() || second.end > map.text_size() || first.begin > first.end ||
        second.begin > second.end || second.begin >= map.text_size()) {
        throw ParameterError("occurrence_distance: span outside text");
    }
    if (first.end > second.begin) {
        throw ParameterError("occurrence_distance: spans overlap or are out of order");
    }
    const std::size_t after_first = map.char_to_token(first.end);
    const std::size_t second_token = map.token_at(second.begin);
    return second_token > after_first ? second_token - after_first : 0;
}

std::optional<std::size_t> median_of(std::vector<std::size_t> values) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return (values[mid - 1] + values[mid] + 1) / 2;
}

std::optional<std::size_t> median_common_distance(const TokenMap& map,
                                                  std::span<const CommonOccurrence> common) {
    std::vector<std::size_t> distances;
    distances.reserve(common.size());
    for (const auto& c : common) distances.push_back(occurrence_distance(map, c.first, c.second));
    return median_of(std::move(distances));
}

std::string_view to_string(DistanceLabel label) {
    switch (label) {
        case DistanceLabel::small: return "Small";
        case DistanceLabel::medium: return "Medium";
        case DistanceLabel::large: return "Large";
    }
    return "?";
}

DistanceLabel distance_label_from_string(std::string_view name) {
    for (auto l : kAllDistanceLabels) {
        if (to_string(l) == name) return l;
    }
    throw ParameterError("unknown distance label '" + std::string(name) + "'");
}

BucketThresholds default_thresholds(Encoding encoding) {
    switch (encoding) {
        case Encoding::incident: return {219, 399};
        case Encoding::adjacency: return {425, 785};
        case Encoding::expert: return {354, 654};
    }
    throw ParameterError("unknown encoding");
}

std::vector<DistanceBucket> distance_buckets(Encoding encoding, const BucketThresholds& t) {
    return {
        {encoding, DistanceLabel::small, std::nullopt, t.small_max},
        {encoding, DistanceLabel::medium, t.small_max, t.medium_max},
        {encoding, DistanceLabel::large, t.medium_max, std::nullopt},
    };
}

DistanceLabel bucketize(std::size_t distance, const BucketThresholds& t) {
    if (distance <= t.small_max) return DistanceLabel::small;
    if (distance <= t.medium_max) return DistanceLabel::medium;
    return DistanceLabel::large;
}

}  // namespace lidbench
