#include "ssr/judge.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ssr {

std::string judge_prompt(const std::string& question, const std::string& gold,
                         const std::string& response) {
    std::string p;
    p += "You are an intelligent chatbot designed for evaluating the correctness of generative "
         "outputs for question-answer pairs.\n";
    p += "Your task is to compare the predicted answer with the correct answer and determine if "
         "they match meaningfully. Here's how you can accomplish the task:\n";
    p += "------\n";
    p += "##INSTRUCTIONS:\n";
    p += "- Focus on the meaningful match between the predicted answer and the correct answer.\n";
    p += "- Consider synonyms or paraphrases as valid matches.\n";
    p += "- Evaluate the correctness of the prediction compared to the answer.\n";
    p += "Please evaluate the following image-based question-answer pair:\n";
    p += "Question: " + question + "\n";
    p += "Correct Answer: " + gold + "\n";
    p += "Predicted Answer: " + response + "\n";
    p += "Provide your evaluation only as a yes/no and score where the score is an integer value "
         "between 0 and 5, with 5 indicating the highest meaningful match.\n";
    p += "Please generate the response in the form of a Python dictionary string with keys 'pred' "
         "and 'score', where value of 'pred' is  a string of 'yes' or 'no' and value of 'score' "
         "is in INTEGER, not STRING.\n";
    p += "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the Python dictionary "
         "string.\n";
    p += "For example, your response should look like this: {'pred': 'yes', 'score': 4.8}.";
    return p;
}

namespace {

// first balanced-brace region, braces inside quoted strings ignored
bool braced_region(const std::string& text, size_t& begin, size_t& end) {
    int depth = 0;
    char quote = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quote) {
            if (c == quote && (i == 0 || text[i - 1] != '\\')) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"') {
            if (depth > 0) quote = c;
            continue;
        }
        if (c == '{') {
            if (depth == 0) begin = i;
            ++depth;
        } else if (c == '}') {
            if (depth > 0 && --depth == 0) {
                end = i + 1;
                return true;
            }
        }
    }
    return false;
}

size_t skip_separators(const std::string& s, size_t at) {
    while (at < s.size() && (isspace(uint8_t(s[at])) || s[at] == ':' || s[at] == '=' ||
                             s[at] == '\'' || s[at] == '"'))
        ++at;
    return at;
}

// finds `key` as a standalone word and reads the value after its separators
bool value_after_key(const std::string& s, const std::string& key, std::string& out) {
    for (size_t at = s.find(key); at != std::string::npos; at = s.find(key, at + 1)) {
        bool left_ok = at == 0 || !isalnum(uint8_t(s[at - 1]));
        size_t after = at + key.size();
        bool right_ok = after >= s.size() || !isalnum(uint8_t(s[after]));
        if (!left_ok || !right_ok) continue;
        size_t v = skip_separators(s, after);
        size_t e = v;
        while (e < s.size() && !isspace(uint8_t(s[e])) && s[e] != ',' && s[e] != '}' &&
               s[e] != '\'' && s[e] != '"')
            ++e;
        if (e == v) continue;
        out = s.substr(v, e - v);
        return true;
    }
    return false;
}

}  // namespace

bool try_parse_judgement(const std::string& text, JudgeResult& out) {
    out.raw = text;
    size_t b = 0, e = 0;
    std::string body;
    if (braced_region(text, b, e))
        body = text.substr(b, e - b);
    else
        body = text;

    std::string pred_tok, score_tok;
    if (!value_after_key(body, "pred", pred_tok) || !value_after_key(body, "score", score_tok))
        return false;
    for (char& c : pred_tok) c = char(tolower(uint8_t(c)));
    if (pred_tok == "yes" || pred_tok == "true")
        out.pred = true;
    else if (pred_tok == "no" || pred_tok == "false")
        out.pred = false;
    else
        return false;

    char* endp = nullptr;
    double v = std::strtod(score_tok.c_str(), &endp);
    if (endp == score_tok.c_str() || !std::isfinite(v)) return false;
    out.score = std::min(5.0, std::max(0.0, v));
    return true;
}

JudgeResult judge(const std::string& question, const std::string& gold, const std::string& response,
                  ExternalClient& client, ResponseCache* cache) {
    ClientRequest req{judge_prompt(question, gold, response), ""};
    auto parses = [](const std::string& text) {
        JudgeResult scratch;
        return try_parse_judgement(text, scratch);
    };
    std::string reply = cached_call(client, cache, req, parses);
    JudgeResult out;
    if (try_parse_judgement(reply, out)) return out;
    reply = client.call(req);  // one retry, bypassing the (unpopulated) cache
    if (try_parse_judgement(reply, out)) {
        if (cache)
            cache->insert(ResponseCache::key_of(client.endpoint(), req.prompt, req.attachment_digest),
                          client.endpoint(), reply);
        return out;
    }
    fprintf(stderr, "warning: judge reply unparseable after retry, scoring (no, 0)\n");
    return JudgeResult{false, 0.0, reply};
}

}  // namespace ssr
