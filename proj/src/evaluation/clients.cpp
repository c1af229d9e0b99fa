#include "aya/evaluation/clients.hpp"

#include "aya/common/error.hpp"
#include "aya/common/hash.hpp"
#include "aya/numerics/rng.hpp"

#include <cstdlib>

namespace aya::evaluation {

double keyed_unit(std::uint64_t key, std::string_view text)
{
    const std::uint64_t h = fnv1a64(text, numerics::mix64(key ^ 0xcbf29ce484222325ULL));
    return static_cast<double>(numerics::mix64(h) >> 11) * 0x1.0p-53;
}

StubJudge::StubJudge(std::uint64_t key, double harmful_fraction) : key_(key), harmful_fraction_(harmful_fraction)
{
    if (!(harmful_fraction >= 0.0 && harmful_fraction <= 1.0)) {
        throw InputError("invalid_argument", "harmful_fraction must lie in [0, 1]");
    }
}

Verdict StubJudge::judge(const std::string&, const std::string& completion_a, const std::string& completion_b)
{
    if (completion_a.size() == completion_b.size()) {
        return Verdict::tie;
    }
    return completion_a.size() > completion_b.size() ? Verdict::a : Verdict::b;
}

bool StubJudge::judge_harmful(const std::string& prompt, const std::string& completion)
{
    std::string joined = prompt;
    joined.push_back('\0');
    joined += completion;
    return keyed_unit(key_, joined) < harmful_fraction_;
}

StubToxicity::StubToxicity(std::uint64_t key) : key_(key) {}

double StubToxicity::score(const std::string& text) { return keyed_unit(key_, text); }

HttpClientOptions HttpClientOptions::from_env(const std::string& prefix)
{
    HttpClientOptions options;
    const char* url = std::getenv((prefix + "_URL").c_str());
    if (url == nullptr || *url == '\0') {
        throw ClientError("missing_credentials", prefix + "_URL is not set");
    }
    options.base_url = url;
    if (const char* key = std::getenv((prefix + "_API_KEY").c_str())) {
        options.api_key = key;
    }
    return options;
}

} // namespace aya::evaluation
