#include "ssr/tokenizer.hpp"

#include <algorithm>
#include <set>

#include "ssr/common.hpp"

namespace ssr {

static const char* kSpecials[4] = {"<pad>", "<bos>", "<eos>", "<latent>"};

Tokenizer Tokenizer::from_table(std::vector<std::string> table) {
    if (table.size() < 4) fail_validation("tokenizer table needs at least the 4 special tokens");
    for (int i = 0; i < 4; ++i)
        if (table[size_t(i)] != kSpecials[i])
            fail_validation(strf("tokenizer table slot %d must be %s", i, kSpecials[i]));
    Tokenizer t;
    for (size_t i = 0; i < table.size(); ++i) {
        const std::string& tok = table[i];
        if (tok.empty()) fail_validation(strf("empty token at id %zu", i));
        for (char c : tok)
            if (c == ' ' || c == '\t' || c == '\n')
                fail_validation("token contains whitespace: '" + tok + "'");
        if (t.map_.count(tok)) fail_validation("duplicate token '" + tok + "'");
        t.map_[tok] = int(i);
    }
    t.table_ = std::move(table);
    return t;
}

Tokenizer Tokenizer::from_corpus(const std::vector<std::string>& texts) {
    std::set<std::string> words;
    std::set<char> chars;
    for (const auto& text : texts) {
        for (const auto& w : split_ws(text)) {
            words.insert(w);
            for (char c : w) chars.insert(c);
        }
    }
    std::vector<std::string> table;
    for (const char* s : kSpecials) table.push_back(s);
    for (const auto& w : words) table.push_back(w);
    for (char c : chars) {
        std::string s(1, c);
        if (!words.count(s)) table.push_back(s);
    }
    return from_table(std::move(table));
}

const Tokenizer& Tokenizer::synthetic_default() {
    static const Tokenizer tok = [] {
        std::vector<std::string> corpus;
        // template words of the scene language (questions and rationales)
        corpus.push_back(
            "a about above all answer are at away because behind below camera closer closest "
            "color column columns comparing contains counting distance distances farther front "
            "gives greater how in is it its just left less many matches matching meters more "
            "nearest no number object objects of only or right row rows scanning scene shape "
            "smallest so than that the there to what which yes");
        corpus.push_back("red green blue yellow purple orange cyan magenta rectangle circle");
        // depths are generated on a fixed quarter-meter grid, so every depth
        // string the generator can emit is a single token
        std::string nums;
        for (int q = 4; q <= 40; ++q) nums += strf("%.2f ", q * 0.25);
        nums += "10.00";
        corpus.push_back(nums);
        // pixel coordinates and counts
        std::string ints;
        for (int i = 0; i < 64; ++i) ints += strf("%d ", i);
        corpus.push_back(ints);
        corpus.push_back("abcdefghijklmnopqrstuvwxyz");  // fallback characters
        corpus.push_back(". -");
        return from_corpus(corpus);
    }();
    return tok;
}

std::vector<int> Tokenizer::encode(const std::string& text, int max_len) const {
    std::vector<int> out;
    for (const auto& w : split_ws(text)) {
        auto it = map_.find(w);
        if (it != map_.end()) {
            out.push_back(it->second);
        } else {
            // character fallback; characters missing from the vocabulary are dropped
            for (char c : w) {
                auto jt = map_.find(std::string(1, c));
                if (jt != map_.end()) out.push_back(jt->second);
            }
        }
    }
    if (max_len >= 0 && int(out.size()) > max_len) out.resize(size_t(max_len));
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::vector<std::string> parts;
    for (int id : ids) {
        if (id < 0 || id >= size()) fail_validation(strf("token id %d out of range", id));
        if (id < 4) continue;
        parts.push_back(table_[size_t(id)]);
    }
    return join(parts, " ");
}

const std::string& Tokenizer::token(int id) const {
    if (id < 0 || id >= size()) fail_validation(strf("token id %d out of range", id));
    return table_[size_t(id)];
}

int Tokenizer::id_of(const std::string& tok) const {
    auto it = map_.find(tok);
    return it == map_.end() ? -1 : it->second;
}

}  // namespace ssr
