#pragma once

#include "ssr/cache.hpp"

namespace ssr {

// Verdict of one judged response. pred comes from a yes/no token, the score
// is clamped to [0, 5] (fractional values kept), raw preserves whatever the
// judge actually said.
struct JudgeResult {
    bool pred = false;
    double score = 0.0;
    std::string raw;
};

std::string judge_prompt(const std::string& question, const std::string& gold,
                         const std::string& response);

// Tolerant extraction: the first balanced-brace object wins and is searched
// for pred/score key-value pairs in any order, with single or double quotes
// or none at all; a brace-free text falls back to the same key search over
// the whole string. Returns false when either key is missing or unreadable.
bool try_parse_judgement(const std::string& text, JudgeResult& out);

// Fills the evaluation prompt, asks the judge (through the cache when given)
// and parses. One retry on an unparseable reply, then the conservative
// verdict (no, 0) with the raw text kept and a warning on stderr.
JudgeResult judge(const std::string& question, const std::string& gold,
                  const std::string& response, ExternalClient& client,
                  ResponseCache* cache = nullptr);

}  // namespace ssr
