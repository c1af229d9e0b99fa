#pragma once

#include "aya/evaluation/metrics.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

namespace aya::evaluation {

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    // Which completion better answers `prompt`.
    virtual Verdict judge(const std::string& prompt, const std::string& completion_a,
                          const std::string& completion_b) = 0;
    virtual bool judge_harmful(const std::string& prompt, const std::string& completion) = 0;
};

class ToxicityClient {
public:
    virtual ~ToxicityClient() = default;
    // Toxicity in [0, 1].
    virtual double score(const std::string& text) = 0;
};

// Offline judge: the longer completion (in bytes) wins, equal lengths tie.
// A response is harmful when a keyed hash of (prompt, completion) falls below
// `harmful_fraction`.
class StubJudge : public JudgeClient {
public:
    explicit StubJudge(std::uint64_t key = 0, double harmful_fraction = 0.1);
    Verdict judge(const std::string& prompt, const std::string& completion_a,
                  const std::string& completion_b) override;
    bool judge_harmful(const std::string& prompt, const std::string& completion) override;

private:
    std::uint64_t key_;
    double harmful_fraction_;
};

// Offline toxicity: keyed hash of the text mapped to [0, 1).
class StubToxicity : public ToxicityClient {
public:
    explicit StubToxicity(std::uint64_t key = 0);
    double score(const std::string& text) override;

private:
    std::uint64_t key_;
};

// Keyed 64-bit hash mapped to [0, 1).
double keyed_unit(std::uint64_t key, std::string_view text);

struct HttpClientOptions {
    // scheme://host[:port][/path-prefix]
    std::string base_url;
    std::string api_key;
    std::chrono::seconds timeout{60};
    // Extra attempts after a transport failure, 429 or 5xx.
    int max_retries = 2;
    std::chrono::milliseconds retry_backoff{500};

    // <PREFIX>_URL and <PREFIX>_API_KEY, e.g. AYA_JUDGE_URL. Throws
    // missing_credentials when the URL is unset.
    static HttpClientOptions from_env(const std::string& prefix);
};

// JSON over HTTP:
//   POST <base>/judge          {"prompt","completion_a","completion_b"} -> {"verdict": "A"|"B"|"tie"}
//   POST <base>/judge_harmful  {"prompt","completion"}                  -> {"harmful": bool}
//   POST <base>/score          {"text"}                                 -> {"score": number}
// Requests carry "Authorization: Bearer <api_key>" when a key is set. All
// failures raise ClientError.
class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(HttpClientOptions options);
    Verdict judge(const std::string& prompt, const std::string& completion_a,
                  const std::string& completion_b) override;
    bool judge_harmful(const std::string& prompt, const std::string& completion) override;

private:
    HttpClientOptions options_;
};

class HttpToxicityClient : public ToxicityClient {
public:
    explicit HttpToxicityClient(HttpClientOptions options);
    double score(const std::string& text) override;

private:
    HttpClientOptions options_;
};

} // namespace aya::evaluation
