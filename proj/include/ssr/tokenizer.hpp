#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ssr {

// Whitespace word-level tokenizer with a per-character fallback for unknown
// words. Ids are dense in [0, size()). The first four ids are reserved:
// pad, bos, eos and the latent slot marker.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kLatentMarker = 3;

    Tokenizer() = default;

    // table[i] becomes the token with id i; table must already contain the
    // four specials at the front
    static Tokenizer from_table(std::vector<std::string> table);

    // specials + sorted unique words + sorted unique single characters
    static Tokenizer from_corpus(const std::vector<std::string>& texts);

    // the fixed vocabulary of the synthetic scene language (colors, shapes,
    // template words, quantized depth strings, small integers, characters)
    static const Tokenizer& synthetic_default();

    // max_len < 0 means unlimited; otherwise the tail is truncated
    std::vector<int> encode(const std::string& text, int max_len = -1) const;

    // joins tokens with single spaces, skipping special ids
    std::string decode(const std::vector<int>& ids) const;

    int size() const { return int(table_.size()); }
    const std::string& token(int id) const;
    int id_of(const std::string& tok) const;  // -1 if absent
    bool has(const std::string& tok) const { return map_.count(tok) != 0; }
    const std::vector<std::string>& table() const { return table_; }

private:
    std::vector<std::string> table_;
    std::unordered_map<std::string, int> map_;
};

}  // namespace ssr
