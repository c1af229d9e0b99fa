#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "aya/common/error.hpp"
#include "aya/evaluation/clients.hpp"

#include <nlohmann/json.hpp>

#include <thread>

namespace aya::evaluation {

namespace {

using nlohmann::json;

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path prefix without trailing '/'
};

Endpoint split_url(const std::string& url)
{
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || (url.compare(0, scheme, "http") != 0 && url.compare(0, scheme, "https") != 0)) {
        throw ClientError("invalid_url", "expected http:// or https:// URL, got '" + url + "'");
    }
    const auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.origin = url.substr(0, slash);
    if (slash != std::string::npos) {
        e.prefix = url.substr(slash);
        while (!e.prefix.empty() && e.prefix.back() == '/') {
            e.prefix.pop_back();
        }
    }
    return e;
}

bool retryable(int status) { return status == 429 || status >= 500; }

// All requests are pure functions of their body, so retrying is safe.
json post_json(const HttpClientOptions& options, const std::string& route, const json& body)
{
    const Endpoint endpoint = split_url(options.base_url);
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    httplib::Headers headers;
    if (!options.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options.api_key);
    }
    const std::string path = endpoint.prefix + route;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(options.retry_backoff * attempt);
        }
        auto result = client.Post(path, headers, payload, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (retryable(result->status)) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw ClientError("http_status", path + " returned HTTP " + std::to_string(result->status));
        }
        try {
            return json::parse(result->body);
        } catch (const json::exception& e) {
            throw ClientError("bad_response", path + " returned invalid JSON: " + e.what());
        }
    }
    throw ClientError("unavailable", path + " failed after " + std::to_string(options.max_retries + 1) +
                                         " attempts (" + last_error + ")");
}

template <class T>
T field(const json& response, const char* name)
{
    try {
        return response.at(name).get<T>();
    } catch (const json::exception&) {
        throw ClientError("bad_response", std::string("response lacks a valid '") + name + "' field");
    }
}

} // namespace

HttpJudgeClient::HttpJudgeClient(HttpClientOptions options) : options_(std::move(options)) { split_url(options_.base_url); }

Verdict HttpJudgeClient::judge(const std::string& prompt, const std::string& completion_a,
                               const std::string& completion_b)
{
    const json response = post_json(options_, "/judge",
                                     {{"prompt", prompt}, {"completion_a", completion_a}, {"completion_b", completion_b}});
    try {
        return parse_verdict(field<std::string>(response, "verdict"));
    } catch (const InputError& e) {
        throw ClientError("bad_response", e.what());
    }
}

bool HttpJudgeClient::judge_harmful(const std::string& prompt, const std::string& completion)
{
    const json response = post_json(options_, "/judge_harmful", {{"prompt", prompt}, {"completion", completion}});
    return field<bool>(response, "harmful");
}

HttpToxicityClient::HttpToxicityClient(HttpClientOptions options) : options_(std::move(options))
{
    split_url(options_.base_url);
}

double HttpToxicityClient::score(const std::string& text)
{
    const double s = field<double>(post_json(options_, "/score", {{"text", text}}), "score");
    if (!(s >= 0.0 && s <= 1.0)) {
        throw ClientError("bad_response", "toxicity score outside [0, 1]");
    }
    return s;
}

} // namespace aya::evaluation
