#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "ssr/sample.hpp"

namespace ssr {

// One request to an external model: the filled prompt plus a digest of any
// attached raster so identical text over different images keys differently.
struct ClientRequest {
    std::string prompt;
    std::string attachment_digest;
};

// stable fingerprint of a sample's pixels, used as the attachment digest
std::string attachment_digest(const Sample& s);

// Base for every external model the pipeline talks to. call() counts actual
// invocations; cache hits never reach it. Mock implementations answer from
// the prompt alone so reruns are deterministic, and live clients are selected
// by configuration only.
class ExternalClient {
  public:
    ExternalClient(std::string endpoint_id, int timeout_ms = 30000, int retry_budget = 1)
        : endpoint_(std::move(endpoint_id)), timeout_ms_(timeout_ms), retries_(retry_budget) {}
    virtual ~ExternalClient() = default;

    std::string call(const ClientRequest& req);
    const std::string& endpoint() const { return endpoint_; }
    int timeout_ms() const { return timeout_ms_; }
    int retry_budget() const { return retries_; }
    int calls() const;
    void reset_calls();

  protected:
    virtual std::string respond(const ClientRequest& req) = 0;

  private:
    std::string endpoint_;
    int timeout_ms_;
    int retries_;
    mutable std::mutex mu_;
    int calls_ = 0;
};

// Test double driven by an arbitrary function of the request.
class ScriptedClient : public ExternalClient {
  public:
    using Fn = std::function<std::string(const ClientRequest&)>;
    ScriptedClient(std::string endpoint_id, Fn fn)
        : ExternalClient(std::move(endpoint_id)), fn_(std::move(fn)) {}

  protected:
    std::string respond(const ClientRequest& req) override { return fn_(req); }

  private:
    Fn fn_;
};

// Answers the fixed spatial query templates by arithmetic on the boxes named
// in the prompt (widths, heights, center distances, directions).
class MockSpatialClient : public ExternalClient {
  public:
    MockSpatialClient() : ExternalClient("mock-spatial") {}

  protected:
    std::string respond(const ClientRequest& req) override;
};

// Fills whichever rationale-generation template the prompt carries: the json
// template yields a {question, rationale, answer} object, the paragraph
// template a coordinate-bearing description, the four-section template a
// summary/caption/reasoning/conclusion paragraph.
class MockRationaleClient : public ExternalClient {
  public:
    MockRationaleClient() : ExternalClient("mock-writer") {}

  protected:
    std::string respond(const ClientRequest& req) override;
};

// Plain VQA stand-in for quality checks: reads the answer off an in-prompt
// rationale when one is present, otherwise guesses from the question shape.
class MockAnswerClient : public ExternalClient {
  public:
    MockAnswerClient() : ExternalClient("mock-answerer") {}

  protected:
    std::string respond(const ClientRequest& req) override;
};

// Grades a filled evaluation prompt by comparing the quoted gold and
// predicted answers, emitting the python-dict shape real judges produce.
class MockJudgeClient : public ExternalClient {
  public:
    MockJudgeClient() : ExternalClient("mock-judge") {}

  protected:
    std::string respond(const ClientRequest& req) override;
};

// Two rule-based task classifiers with deliberately different heuristics, so
// agreement filtering sees both consensus and genuine disagreement.
class MockClassifierClient : public ExternalClient {
  public:
    enum class Ruleset { a, b };
    explicit MockClassifierClient(Ruleset r)
        : ExternalClient(r == Ruleset::a ? "mock-classifier-a" : "mock-classifier-b"), rules_(r) {}

  protected:
    std::string respond(const ClientRequest& req) override;

  private:
    Ruleset rules_;
};

// POSTs {prompt, attachment_digest} as json to <base_url>/complete and
// returns the "text" field. Selected only by configuration; tests never
// construct one.
class LiveHttpClient : public ExternalClient {
  public:
    LiveHttpClient(std::string endpoint_id, std::string base_url, int timeout_ms = 30000);

  protected:
    std::string respond(const ClientRequest& req) override;

  private:
    std::string base_url_;
};

// kind: spatial | writer | answerer | judge | classifier-a | classifier-b.
// mode "mock" returns the rule mocks above; "live" requires base_url.
std::unique_ptr<ExternalClient> make_client(const std::string& kind, const std::string& mode,
                                            const std::string& base_url = "");

}  // namespace ssr
