#include "ssr/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "ssr/common.hpp"
#include "ssr/dataset.hpp"
#include "ssr/image_io.hpp"
#include "ssr/parallel.hpp"

namespace fs = std::filesystem;

namespace ssr {

using nlohmann::json;

namespace {

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (isalpha(uint8_t(c)) || c == '\'') {
            cur.push_back(char(tolower(uint8_t(c))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool in_set(const std::string& w, std::initializer_list<const char*> set) {
    for (const char* s : set)
        if (w == s) return true;
    return false;
}

}  // namespace

bool context_dependent(const std::string& question) {
    std::vector<std::string> ws = words_of(question);
    for (size_t i = 0; i < ws.size(); ++i) {
        const std::string& w = ws[i];
        bool last = i + 1 == ws.size();
        if (in_set(w, {"it", "its", "itself", "they", "them", "their", "theirs", "he", "him",
                       "his", "she", "her", "hers"}))
            return true;
        if (in_set(w, {"previous", "previously"})) return true;
        // "that one", trailing "these": the noun lives in an earlier turn
        if (in_set(w, {"this", "that", "these", "those"}) &&
            (last || in_set(ws[i + 1], {"one", "ones"})))
            return true;
        // discourse "above" ("as above", trailing "above"); "above the door"
        // keeps its spatial reading
        if (w == "above" &&
            (last || (i > 0 && in_set(ws[i - 1], {"the", "as", "mentioned", "stated", "described",
                                                  "shown"}))))
            return true;
    }
    return false;
}

std::vector<QaPair> extract_one_turn(const std::vector<Turn>& conversation) {
    if (conversation.size() % 2 != 0)
        fail_validation("conversation ends on an unanswered turn");
    std::vector<QaPair> out;
    for (size_t i = 0; i < conversation.size(); i += 2) {
        const Turn& u = conversation[i];
        const Turn& a = conversation[i + 1];
        if (u.role != "user" || a.role != "assistant")
            fail_validation(strf("conversation must alternate user/assistant, got %s/%s at turn %zu",
                                 u.role.c_str(), a.role.c_str(), i));
        if (context_dependent(u.text)) continue;
        out.push_back({u.text, a.text});
    }
    return out;
}

std::string bbox_str(const BBox& b) {
    if (b.x1 < 0 || b.y1 < 0 || b.x2 <= b.x1 || b.y2 <= b.y1)
        fail_validation(strf("degenerate bbox [%d,%d,%d,%d]", b.x1, b.y1, b.x2, b.y2));
    return strf("[%d,%d,%d,%d]", b.x1, b.y1, b.x2, b.y2);
}

std::vector<std::string> spatial_queries(const BBox& b) {
    const std::string bb = bbox_str(b);
    const char* tail = " Think step by step, and avoid repetition.";
    std::vector<std::string> out;
    out.push_back("What is the object in " + bb + "?" + tail);
    out.push_back("Can you estimate the height and width of " + bb + "?" + tail);
    for (const char* dir : {"to the left of", "to the right of", "in front of", "behind", "below",
                            "above"}) {
        out.push_back(strf("What is the object %s %s, and what is its height and width?%s", dir,
                           bb.c_str(), tail));
        out.push_back(strf("What is the object %s %s, and what is its distance to %s?%s", dir,
                           bb.c_str(), bb.c_str(), tail));
    }
    return out;
}

std::vector<std::string> pairwise_queries(const BBox& b1, const BBox& b2) {
    const std::string a = bbox_str(b1), b = bbox_str(b2);
    const char* tail = " Think step by step, and avoid repetition.";
    return {
        strf("Which one is higher between %s and %s?%s", a.c_str(), b.c_str(), tail),
        strf("Can you estimate how far apart %s and %s are?%s", a.c_str(), b.c_str(), tail),
        strf("What direction is %s in relation to %s?%s", b.c_str(), a.c_str(), tail),
        strf("How far is %s from %s horizontally?%s", a.c_str(), b.c_str(), tail),
        strf("Does %s have a larger size compared to %s?%s", a.c_str(), b.c_str(), tail),
        strf("Does %s have a lesser width compared to %s?%s", a.c_str(), b.c_str(), tail),
    };
}

std::string visual_cot_prompt(const BBox& bbox, const std::string& transcript) {
    std::string p;
    p += "Please generate an image description in continuous paragraphs using these strict "
         "guidelines:\n";
    p += "\n";
    p += "Coordinate Usage Rules:\n";
    p += "1. ONLY use coordinates that are explicitly defined in this mapping table:\n";
    p += "  - Region [0]: " + bbox_str(bbox) + "\n";
    p += "2. Do NOT create or infer any new coordinates\n";
    p += "3. Each coordinate can only be used ONCE in the description\n";
    p += "4. Coordinates must be written in [x1,y1,x2,y2] format without spaces\n";
    p += "\n";
    p += "Content Rules:\n";
    p += "1. Place coordinate immediately after describing its corresponding object\n";
    p += "2. Integrate coordinates naturally within complete sentences\n";
    p += "3. Include all provided measurements and spatial relationships\n";
    p += "4. Maintain narrative flow while incorporating technical details\n";
    p += "5. Focus on visual elements and their relationships\n";
    p += "6. Embed coordinates from the mapping table immediately after their corresponding "
         "region objects (e.g., \"a dog [x1,y1,x2,y2]\")\n";
    p += "7. Maintain paragraph continuity by integrating coordinates within complete sentences\n";
    p += "8. Preserve strict region-coordinate mapping from the provided table\n";
    p += "9. Use only [x1,y1,x2,y2] format without spaces\n";
    p += "10. Exclude technical metadata and region index numbers from final text\n";
    p += "11. Automatically resolve spatial contradictions using coordinate data\n";
    p += "12. Ensure coordinate annotations flow naturally after object nouns\n";
    p += "\n";
    p += "Input Data:\n";
    p += transcript;
    return p;
}

std::string vocot_prompt(const std::string& question, const std::string& answer,
                         const std::string& transcript) {
    std::string p;
    p += "Integrate all measurements values and spatial information from the conversation into "
         "answer to get detailed reasoning rationale with spatial details.\n";
    p += "Then, extract the direct question and answer from question and answer respectively.\n";
    p += "\n";
    p += "Content Rules:\n";
    p += "1. Place coordinate immediately after describing its corresponding object first time, "
         "make sure each coordinate appear only once.\n";
    p += "2. Avoid introducing other coordinates that do not appear in answer.\n";
    p += "3. Add all provided measurements values and spatial relationships from the conversation "
         "to the rationale detailedly.\n";
    p += "4. Ensure the rationale contains all the information from each sentence in the "
         "conversation, especially the measurements values and spatial relationships.\n";
    p += "5. Automatically resolve spatial contradictions using coordinate data based on the "
         "image.\n";
    p += "\n";
    p += "Output in the following json template:\n";
    p += "{\n";
    p += "  \"question\": <question>\n";
    p += "  , \"rationale\": <rationale>\n";
    p += "  , \"answer\": <answer>\n";
    p += "}\n";
    p += "\n";
    p += "Question: " + question + "\n";
    p += "Answer: " + answer + "\n";
    p += "Conversation:\n";
    p += transcript;
    return p;
}

std::string spatialqa_prompt(const std::string& question, const std::string& answer) {
    std::string p;
    p += "I have an image and a question that I want you to answer.\n";
    p += "I need you to strictly follow the format with four specific sections: summary, caption, "
         "reasoning, and conclusion.\n";
    p += "It is crucial that you adhere to this structure exactly as outlined and that the final "
         "answer in the conclusion matches the standard correct answer precisely.\n";
    p += "To explain further:\n";
    p += "  - In summary, briefly explain what steps you'll take to solve the problem.\n";
    p += "  - In caption, describe the contents of the image, specifically focusing on details "
         "relevant to the question.\n";
    p += "  - In reasoning, outline a step-by-step thought process you would use to solve the "
         "problem based on the image.\n";
    p += "  - In conclusion, give the final answer in a direct format, and it must match the "
         "correct answer exactly. If it's a multiple choice question, the conclusion should only "
         "include the option without repeating what the option is.\n";
    p += "Finally, integrate these sections into a natural thinking paragraph.\n";
    p += "\n";
    p += "Here's the question and answer:\n";
    p += "Question: " + question + "\n";
    p += "Answer: " + answer;
    return p;
}

std::string SpatialTranscript::text() const {
    std::string out;
    for (const QaPair& p : qa) {
        out += "Q: " + p.question + "\n";
        out += "A: " + p.answer + "\n";
    }
    return out;
}

SpatialTranscript collect_spatial_answers(const Sample& s, ExternalClient& spatial,
                                          ResponseCache* cache) {
    SpatialTranscript tr;
    if (s.source == SourceKind::spatialqa || s.source == SourceKind::llava_cot) return tr;

    std::vector<std::string> queries;
    if (s.source == SourceKind::visual_cot) {
        if (s.bboxes.empty()) fail_validation(strf("record %s has no bbox to query", s.id.c_str()));
        queries = spatial_queries(s.bboxes[0]);
    } else {
        for (const BBox& b : s.bboxes)
            for (std::string& q : spatial_queries(b)) queries.push_back(std::move(q));
        for (size_t i = 0; i < s.bboxes.size(); ++i)
            for (size_t j = i + 1; j < s.bboxes.size(); ++j)
                for (std::string& q : pairwise_queries(s.bboxes[i], s.bboxes[j]))
                    queries.push_back(std::move(q));
    }

    std::string digest = attachment_digest(s);
    for (const std::string& q : queries) {
        bool hit = false;
        std::string a = cached_call(spatial, cache, {q, digest}, nullptr, &hit);
        tr.qa.push_back({q, a});
        hit ? ++tr.cache_hits : ++tr.calls;
    }
    return tr;
}

namespace {

// first balanced top-level object in `text`, or npos pair
bool brace_span(const std::string& text, size_t& begin, size_t& end) {
    int depth = 0;
    bool in_str = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_str) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_str = false;
            continue;
        }
        if (c == '"' && depth > 0) {
            in_str = true;
        } else if (c == '{') {
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

// {question, rationale, answer} object with a non-empty rationale
bool parse_json_rationale(const std::string& text, std::string& rationale) {
    size_t b = 0, e = 0;
    if (!brace_span(text, b, e)) return false;
    json obj = json::parse(text.substr(b, e - b), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return false;
    for (const char* k : {"question", "rationale", "answer"})
        if (!obj.contains(k) || !obj[k].is_string()) return false;
    rationale = obj["rationale"].get<std::string>();
    return !rationale.empty();
}

bool sections_in_order(const std::string& text) {
    std::string low;
    low.reserve(text.size());
    for (char c : text) low.push_back(char(tolower(uint8_t(c))));
    size_t at = 0;
    for (const char* k : {"summary", "caption", "reasoning", "conclusion"}) {
        at = low.find(k, at);
        if (at == std::string::npos) return false;
        at += std::strlen(k);
    }
    return true;
}

}  // namespace

RationaleOutcome generate_rationale(const Sample& s, const SpatialTranscript& tr,
                                    ExternalClient& writer, ResponseCache* cache) {
    std::string prompt, template_id;
    std::function<bool(const std::string&)> acceptable;
    std::string rationale;

    switch (s.source) {
        case SourceKind::vocot:
        case SourceKind::synthetic:
            prompt = vocot_prompt(s.question, s.answer, tr.text());
            template_id = "vocot";
            acceptable = [&rationale](const std::string& r) {
                return parse_json_rationale(r, rationale);
            };
            break;
        case SourceKind::visual_cot: {
            if (s.bboxes.empty())
                fail_validation(strf("record %s has no bbox to describe", s.id.c_str()));
            prompt = visual_cot_prompt(s.bboxes[0], tr.text());
            template_id = "visual-cot";
            std::string coord = bbox_str(s.bboxes[0]);
            acceptable = [&rationale, coord](const std::string& r) {
                if (normalize_ws(r).empty() || r.find(coord) == std::string::npos) return false;
                rationale = r;
                return true;
            };
            break;
        }
        case SourceKind::spatialqa:
            prompt = spatialqa_prompt(s.question, s.answer);
            template_id = "spatialqa";
            acceptable = [&rationale](const std::string& r) {
                if (!sections_in_order(r)) return false;
                rationale = r;
                return true;
            };
            break;
        case SourceKind::llava_cot:
            fail_validation("llava-cot records carry their rationale already");
    }

    ClientRequest req{prompt, attachment_digest(s)};
    bool hit = false;
    std::string reply = cached_call(writer, cache, req, acceptable, &hit);
    bool ok = acceptable(reply);
    if (!ok) {
        reply = writer.call(req);  // one retry; the bad reply was never cached
        ok = acceptable(reply);
        if (ok && cache)
            cache->insert(ResponseCache::key_of(writer.endpoint(), req.prompt, req.attachment_digest),
                          writer.endpoint(), reply);
    }

    RationaleOutcome out;
    out.raw = reply;
    if (!ok) return out;
    out.ok = true;
    out.record.sample = s;
    out.record.sample.rationale = rationale;
    out.record.template_id = template_id;
    out.record.rationale_client = writer.endpoint();
    out.record.rationale_cache_hit = hit;
    out.record.spatial_calls = tr.calls;
    out.record.spatial_cache_hits = tr.cache_hits;
    return out;
}

QualityReport quality_check(std::vector<AnnotatedRecord>& records, ExternalClient& answerer,
                            ExternalClient& judge_client, ResponseCache* cache,
                            double sample_rate, double min_delta, uint64_t seed) {
    QualityReport rep;
    if (records.empty()) return rep;
    if (sample_rate <= 0.0 || sample_rate > 1.0)
        fail_validation(strf("sample_rate %g outside (0, 1]", sample_rate));

    std::vector<int> idx(records.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
    Rng rng(mix_seed(seed, "quality-sample"));
    rng.shuffle(idx);
    size_t k = size_t(std::max<long>(1, std::lround(sample_rate * double(records.size()))));
    k = std::min(k, idx.size());
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    int with_ok = 0, without_ok = 0;
    double with_sum = 0.0, without_sum = 0.0;
    for (int i : idx) {
        AnnotatedRecord& rec = records[size_t(i)];
        const Sample& s = rec.sample;
        std::string digest = attachment_digest(s);
        std::string with_prompt = "context: " + s.rationale.value_or("") +
                                  "\n\nquestion: " + s.question + "\nanswer:";
        std::string without_prompt = "question: " + s.question + "\nanswer:";

        std::string with_ans = cached_call(answerer, cache, {with_prompt, digest});
        std::string without_ans = cached_call(answerer, cache, {without_prompt, digest});
        JudgeResult jw = judge(s.question, s.answer, with_ans, judge_client, cache);
        JudgeResult jo = judge(s.question, s.answer, without_ans, judge_client, cache);

        with_ok += jw.pred ? 1 : 0;
        without_ok += jo.pred ? 1 : 0;
        with_sum += jw.score;
        without_sum += jo.score;
        rec.quality_score = jw.score;
    }

    rep.checked = int(k);
    rep.with_acc = 100.0 * with_ok / double(k);
    rep.without_acc = 100.0 * without_ok / double(k);
    rep.with_score = with_sum / double(k);
    rep.without_score = without_sum / double(k);
    double delta = rep.with_acc - rep.without_acc;
    rep.passed = delta > 0.0 && delta >= min_delta;
    return rep;
}

AnnotateResult annotate_run(const std::vector<Sample>& records, const AnnotateConfig& cfg,
                            const AnnotateClients& clients, const std::string& out_dir) {
    if (!clients.spatial || !clients.writer || !clients.answerer || !clients.judge)
        fail_validation("annotate_run needs all four clients");
    if (cfg.parallelism < 1) fail_validation("parallelism must be >= 1");
    std::string want = cfg.source;
    for (char& c : want)
        if (c == '_') c = '-';
    if (want == "llava-cot")
        fail_validation("llava-cot records keep their native rationales; nothing to annotate");
    SourceKind want_kind = source_from_name(want);  // rejects unknown names

    for (ExternalClient* c : {clients.spatial, clients.writer, clients.answerer, clients.judge})
        c->reset_calls();

    std::vector<int> matching;
    std::vector<const Sample*> returned;
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].source == want_kind)
            matching.push_back(int(i));
        else
            returned.push_back(&records[i]);
    }

    std::vector<RationaleOutcome> outcomes(matching.size());
    parallel_indexed(int(matching.size()), cfg.parallelism, [&](int j, int) {
        const Sample& s = records[size_t(matching[size_t(j)])];
        try {
            SpatialTranscript tr = collect_spatial_answers(s, *clients.spatial, clients.cache);
            outcomes[size_t(j)] = generate_rationale(s, tr, *clients.writer, clients.cache);
        } catch (const ValidationError& e) {
            outcomes[size_t(j)].ok = false;
            outcomes[size_t(j)].raw = std::string("validation: ") + e.what();
        }
    });

    std::vector<AnnotatedRecord> annotated;
    std::vector<std::pair<const Sample*, std::string>> quarantined;
    for (size_t j = 0; j < outcomes.size(); ++j) {
        if (outcomes[j].ok) {
            annotated.push_back(std::move(outcomes[j].record));
            annotated.back().spatial_client = clients.spatial->endpoint();
        } else
            quarantined.push_back({&records[size_t(matching[j])], outcomes[j].raw});
    }

    AnnotateResult res;
    res.quality = quality_check(annotated, *clients.answerer, *clients.judge, clients.cache,
                                cfg.sample_rate, cfg.min_delta, cfg.seed);
    res.annotated = int(annotated.size());
    res.quarantined = int(quarantined.size());
    res.returned = int(returned.size());

    fs::create_directories(out_dir);
    auto dump_lines = [&](const std::string& name, const std::string& body) {
        write_file_atomic((fs::path(out_dir) / name).string(), body);
    };
    std::string body;
    for (const AnnotatedRecord& r : annotated) body += sample_to_jsonl_line(r.sample) + "\n";
    dump_lines("annotated.jsonl", body);
    body.clear();
    for (const auto& [s, raw] : quarantined) body += sample_to_jsonl_line(*s) + "\n";
    dump_lines("quarantine.jsonl", body);
    body.clear();
    for (const Sample* s : returned) body += sample_to_jsonl_line(*s) + "\n";
    dump_lines("returned.jsonl", body);

    json per_record = json::array();
    for (const AnnotatedRecord& r : annotated) {
        json row = {{"id", r.sample.id},
                    {"template", r.template_id},
                    {"spatial_calls", r.spatial_calls},
                    {"spatial_cache_hits", r.spatial_cache_hits},
                    {"rationale_cache_hit", r.rationale_cache_hit}};
        if (r.quality_score >= 0.0) row["quality_score"] = r.quality_score;
        per_record.push_back(row);
    }
    json quar = json::array();
    for (const auto& [s, raw] : quarantined) quar.push_back({{"id", s->id}, {"response", raw}});

    res.report = json{
        {"source", want},
        {"input_records", records.size()},
        {"annotated", res.annotated},
        {"quarantined", res.quarantined},
        {"returned", res.returned},
        {"client_calls",
         {{clients.spatial->endpoint(), clients.spatial->calls()},
          {clients.writer->endpoint(), clients.writer->calls()},
          {clients.answerer->endpoint(), clients.answerer->calls()},
          {clients.judge->endpoint(), clients.judge->calls()}}},
        {"cache", clients.cache ? json{{"hits", clients.cache->hits()},
                                       {"misses", clients.cache->misses()}}
                                : json(nullptr)},
        {"quality",
         {{"checked", res.quality.checked},
          {"with_acc", res.quality.with_acc},
          {"without_acc", res.quality.without_acc},
          {"with_score", res.quality.with_score},
          {"without_score", res.quality.without_score},
          {"passed", res.quality.passed}}},
        {"records", per_record},
        {"quarantine", quar},
    };
    dump_lines("annotate_report.json", res.report.dump(2) + "\n");
    return res;
}

}  // namespace ssr
