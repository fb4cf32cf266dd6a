#include "ssr/client.hpp"

#include <cmath>
#include <cstring>

#include "httplib.h"
#include "json.hpp"
#include "ssr/sha256.hpp"

namespace ssr {

using nlohmann::json;

std::string attachment_digest(const Sample& s) {
    if (s.image.empty())
        return sha256_hex("paths:" + s.image_path + "\n" + s.depth_path);
    std::string buf = strf("img:%dx%d\n", s.h, s.w);
    size_t at = buf.size();
    buf.resize(at + s.image.size() * sizeof(float) + s.depth.size() * sizeof(float));
    std::memcpy(buf.data() + at, s.image.data(), s.image.size() * sizeof(float));
    std::memcpy(buf.data() + at + s.image.size() * sizeof(float), s.depth.data(),
                s.depth.size() * sizeof(float));
    return sha256_hex(buf);
}

std::string ExternalClient::call(const ClientRequest& req) {
    {
        std::lock_guard<std::mutex> lk(mu_);
        ++calls_;
    }
    return respond(req);
}

int ExternalClient::calls() const {
    std::lock_guard<std::mutex> lk(mu_);
    return calls_;
}

void ExternalClient::reset_calls() {
    std::lock_guard<std::mutex> lk(mu_);
    calls_ = 0;
}

namespace {

std::vector<BBox> boxes_in(const std::string& text) {
    std::vector<BBox> out;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '[') continue;
        int v[4] = {0, 0, 0, 0};
        size_t p = i + 1;
        bool ok = true;
        for (int k = 0; k < 4 && ok; ++k) {
            if (p >= text.size() || !isdigit(uint8_t(text[p]))) {
                ok = false;
                break;
            }
            while (p < text.size() && isdigit(uint8_t(text[p]))) v[k] = v[k] * 10 + (text[p++] - '0');
            char want = k < 3 ? ',' : ']';
            if (p >= text.size() || text[p] != want) ok = false;
            ++p;
        }
        if (ok) {
            out.push_back({v[0], v[1], v[2], v[3]});
            i = p - 1;
        }
    }
    return out;
}

bool same_box(const BBox& a, const BBox& b) {
    return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

std::string box_text(const BBox& b) {
    return strf("[%d,%d,%d,%d]", b.x1, b.y1, b.x2, b.y2);
}

double cx(const BBox& b) { return 0.5 * (b.x1 + b.x2); }
double cy(const BBox& b) { return 0.5 * (b.y1 + b.y2); }

// first line after `tag`, trimmed; empty when the tag is absent
std::string line_after(const std::string& text, const std::string& tag) {
    size_t at = text.find(tag);
    if (at == std::string::npos) return "";
    at += tag.size();
    size_t end = text.find('\n', at);
    std::string out = text.substr(at, end == std::string::npos ? std::string::npos : end - at);
    size_t a = out.find_first_not_of(" \t\r");
    size_t b = out.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : out.substr(a, b - a + 1);
}

std::string join_answer_lines(const std::string& transcript) {
    std::string out;
    size_t at = 0;
    while ((at = transcript.find("A: ", at)) != std::string::npos) {
        at += 3;
        size_t end = transcript.find('\n', at);
        std::string line = transcript.substr(at, end == std::string::npos ? std::string::npos : end - at);
        if (!line.empty()) {
            if (!out.empty()) out += " ";
            out += line;
        }
        if (end == std::string::npos) break;
        at = end;
    }
    return out;
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::string MockSpatialClient::respond(const ClientRequest& req) {
    const std::string& q = req.prompt;
    std::vector<BBox> bs = boxes_in(q);
    if (bs.empty()) return "i cannot locate any region in this request";
    BBox b = bs[0];
    int w = b.x2 - b.x1, h = b.y2 - b.y1;

    if (bs.size() >= 2 && !same_box(bs[0], bs[1])) {
        BBox b2 = bs[1];
        if (q.find("Which one is higher") != std::string::npos) {
            const BBox& hi = b.y1 <= b2.y1 ? b : b2;
            return strf("%s is higher in the image", box_text(hi).c_str());
        }
        if (q.find("how far apart") != std::string::npos) {
            double d = std::hypot(cx(b) - cx(b2), cy(b) - cy(b2));
            return strf("they are about %d pixels apart", int(std::lround(d)));
        }
        if (q.find("What direction is") != std::string::npos) {
            // template order puts the subject box first
            double dx = cx(b) - cx(b2), dy = cy(b) - cy(b2);
            const char* dir = std::abs(dx) >= std::abs(dy) ? (dx < 0 ? "to the left of" : "to the right of")
                                                           : (dy < 0 ? "above" : "below");
            return strf("%s is %s %s", box_text(b).c_str(), dir, box_text(b2).c_str());
        }
        if (q.find("horizontally") != std::string::npos)
            return strf("the horizontal distance is about %d pixels",
                        int(std::lround(std::abs(cx(b) - cx(b2)))));
        if (q.find("larger size") != std::string::npos) {
            long a1 = long(w) * h, a2 = long(b2.x2 - b2.x1) * (b2.y2 - b2.y1);
            return a1 > a2 ? "yes, the first region is larger" : "no, the first region is not larger";
        }
        if (q.find("lesser width") != std::string::npos)
            return w < b2.x2 - b2.x1 ? "yes, the first region is narrower"
                                     : "no, the first region is at least as wide";
    }

    if (starts_with(q, "Can you estimate the height and width"))
        return strf("the region %s is about %d pixels tall and %d pixels wide",
                    box_text(b).c_str(), h, w);
    // directional templates first: "object in front of" would otherwise match
    // the plain "object in" branch
    for (const char* dir : {"to the left of", "to the right of", "in front of", "behind", "below",
                            "above"}) {
        if (q.find(std::string("object ") + dir) == std::string::npos) continue;
        if (q.find("height and width") != std::string::npos)
            return strf("the object %s %s is a neighboring region about %d by %d pixels", dir,
                        box_text(b).c_str(), w, h);
        return strf("the object %s %s sits about %d pixels away", dir, box_text(b).c_str(),
                    (w + h) / 2);
    }
    if (starts_with(q, "What is the object in "))
        return strf("the object in %s is a clearly marked region of the scene", box_text(b).c_str());
    return "i cannot tell from the image";
}

std::string MockRationaleClient::respond(const ClientRequest& req) {
    const std::string& p = req.prompt;
    if (starts_with(p, "Integrate all measurements")) {
        std::string q = line_after(p, "Question: ");
        std::string a = line_after(p, "Answer: ");
        size_t conv_at = p.find("Conversation:");
        std::string conv = conv_at == std::string::npos ? "" : p.substr(conv_at);
        std::string rat = join_answer_lines(conv);
        if (rat.empty()) rat = "the scene offers no measurements";
        rat += " so the answer is " + a;
        return json{{"question", q}, {"rationale", rat}, {"answer", a}}.dump();
    }
    if (starts_with(p, "Please generate an image description")) {
        std::vector<BBox> bs = boxes_in(line_after(p, "- Region [0]:"));
        std::string coord = bs.empty() ? "[0,0,1,1]" : box_text(bs[0]);
        std::string details = join_answer_lines(p);
        return "the image centers on a marked object " + coord +
               " whose extent follows from the measurements. " + details +
               ". together these observations describe the scene fully.";
    }
    if (starts_with(p, "I have an image and a question")) {
        std::string q = line_after(p, "Question: ");
        std::string a = line_after(p, "Answer: ");
        return "summary: i will read the scene measurements relevant to the question. caption: "
               "the image shows the arrangement asked about by \"" +
               q +
               "\". reasoning: combining the visible layout with the measured depths leads "
               "directly to the result. conclusion: " +
               a;
    }
    return "unsupported request";
}

std::string MockAnswerClient::respond(const ClientRequest& req) {
    const std::string& p = req.prompt;
    auto tail_after = [&](const char* tag) -> std::string {
        size_t at = p.rfind(tag);
        if (at == std::string::npos) return "";
        at += std::strlen(tag);
        size_t end = p.find('\n', at);
        std::string out = p.substr(at, end == std::string::npos ? std::string::npos : end - at);
        while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
        return out;
    };
    std::string from_rat = tail_after("so the answer is ");
    if (!from_rat.empty()) return from_rat;
    from_rat = tail_after("conclusion: ");
    if (!from_rat.empty()) return from_rat;

    std::string q = line_after(p, "question: ");
    if (q.find("is there") != std::string::npos) return "yes";
    if (starts_with(q, "how many")) return "2";
    if (starts_with(q, "what color")) return "red";
    if (starts_with(q, "what shape")) return "circle";
    size_t orp = q.rfind(" or ");
    if (orp != std::string::npos) return q.substr(orp + 4);
    if (starts_with(q, "what is the object")) return "nothing";
    return "unknown";
}

std::string MockJudgeClient::respond(const ClientRequest& req) {
    auto norm = [](std::string s) {
        std::string out;
        for (char c : s) {
            if (isspace(uint8_t(c))) {
                if (!out.empty() && out.back() != ' ') out.push_back(' ');
            } else {
                out.push_back(char(tolower(uint8_t(c))));
            }
        }
        while (!out.empty() && (out.back() == ' ' || out.back() == '.')) out.pop_back();
        return out;
    };
    std::string gold = norm(line_after(req.prompt, "Correct Answer: "));
    std::string pred = norm(line_after(req.prompt, "Predicted Answer: "));
    if (!gold.empty() && gold == pred) return "{'pred': 'yes', 'score': 5}";
    if (!gold.empty() && !pred.empty() &&
        (gold.find(pred) != std::string::npos || pred.find(gold) != std::string::npos))
        return "{'pred': 'yes', 'score': 4}";
    return "{'pred': 'no', 'score': 1}";
}

std::string MockClassifierClient::respond(const ClientRequest& req) {
    std::string q = line_after(req.prompt, "Question: ");
    for (char& c : q) c = char(tolower(uint8_t(c)));
    std::string cat, sub;
    if (rules_ == Ruleset::a) {
        if (starts_with(q, "is there")) {
            cat = "general", sub = "existence";
        } else if (starts_with(q, "what color") || starts_with(q, "what shape")) {
            cat = "general", sub = "attribute recognition";
        } else if (starts_with(q, "how many")) {
            cat = "spatial", sub = "count";
        } else if (starts_with(q, "which is")) {
            cat = "spatial", sub = "relative position recognition";
        } else if (starts_with(q, "what is the object")) {
            cat = "spatial", sub = "position based object recognition";
        } else if (q.find("doing") != std::string::npos) {
            cat = "general", sub = "action recognition";
        } else {
            cat = "general", sub = "None";
        }
    } else {
        if (q.find("how many") != std::string::npos) {
            cat = "spatial", sub = "count";
        } else if (q.find(" or the ") != std::string::npos) {
            cat = "spatial", sub = "relative position recognition";
        } else if (starts_with(q, "what is the object")) {
            cat = "spatial", sub = "position based object recognition";
        } else if (starts_with(q, "is there")) {
            cat = "general", sub = "existence";
        } else if (q.find("nearest to the camera") != std::string::npos) {
            // reads camera-relative wording as spatial, unlike ruleset a
            cat = "spatial", sub = "position based object recognition";
        } else if (starts_with(q, "what color") || starts_with(q, "what shape")) {
            cat = "general", sub = "attribute recognition";
        } else if (q.find("doing") != std::string::npos) {
            cat = "general", sub = "action recognition";
        } else {
            cat = "general", sub = "None";
        }
    }
    return json{{"category", cat}, {"subtask", sub}}.dump();
}

LiveHttpClient::LiveHttpClient(std::string endpoint_id, std::string base_url, int timeout_ms)
    : ExternalClient(std::move(endpoint_id), timeout_ms), base_url_(std::move(base_url)) {
    if (base_url_.empty()) fail_validation("live client needs a base url");
}

std::string LiveHttpClient::respond(const ClientRequest& req) {
    httplib::Client http(base_url_);
    http.set_read_timeout(timeout_ms() / 1000, (timeout_ms() % 1000) * 1000);
    json body = {{"endpoint", endpoint()},
                 {"prompt", req.prompt},
                 {"attachment_digest", req.attachment_digest}};
    auto res = http.Post("/complete", body.dump(), "application/json");
    if (!res || res->status != 200)
        fail_runtime(strf("live client %s: request failed (status %d)", endpoint().c_str(),
                          res ? res->status : -1));
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("text"))
        fail_runtime(strf("live client %s: malformed response body", endpoint().c_str()));
    return parsed["text"].get<std::string>();
}

std::unique_ptr<ExternalClient> make_client(const std::string& kind, const std::string& mode,
                                            const std::string& base_url) {
    if (mode == "live") return std::make_unique<LiveHttpClient>(kind, base_url);
    if (mode != "mock") fail_validation(strf("unknown client mode %s", mode.c_str()));
    if (kind == "spatial") return std::make_unique<MockSpatialClient>();
    if (kind == "writer") return std::make_unique<MockRationaleClient>();
    if (kind == "answerer") return std::make_unique<MockAnswerClient>();
    if (kind == "judge") return std::make_unique<MockJudgeClient>();
    if (kind == "classifier-a")
        return std::make_unique<MockClassifierClient>(MockClassifierClient::Ruleset::a);
    if (kind == "classifier-b")
        return std::make_unique<MockClassifierClient>(MockClassifierClient::Ruleset::b);
    fail_validation(strf("unknown client kind %s", kind.c_str()));
}

}  // namespace ssr
