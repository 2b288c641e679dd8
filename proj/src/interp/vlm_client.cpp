// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks Eigen's kernels.
#include "blindspot/interp/interp.hpp"

#include "httplib.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "json.hpp"

#include "blindspot/error.hpp"

namespace blindspot::interp {

std::string base64(const std::vector<std::uint8_t>& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

namespace {

std::set<std::string> tokens(const std::string& text)
{
    std::set<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.insert(cur);
    }
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& t : a) {
        common += b.count(t);
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

struct Endpoint {
    std::string base; // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url)
{
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw Error(ErrorKind::Argument, "endpoint must be an http(s) URL, got '" + url + "'");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string excerpt(const std::string& body)
{
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

class Redactor {
public:
    Redactor(LogSink sink, std::string secret) : sink_(std::move(sink)), secret_(std::move(secret)) {}

    void operator()(std::string line) const
    {
        if (!sink_) {
            return;
        }
        if (!secret_.empty()) {
            for (auto pos = line.find(secret_); pos != std::string::npos; pos = line.find(secret_, pos)) {
                line.replace(pos, secret_.size(), "[redacted]");
            }
        }
        std::lock_guard lock(mu_);
        sink_(line);
    }

private:
    LogSink sink_;
    std::string secret_;
    mutable std::mutex mu_;
};

struct Outcome {
    std::string text;
    std::size_t retries = 0;
};

Outcome request_one(const Bitmap& image, std::size_t index, const VlmConfig& cfg, const Endpoint& ep,
                    const std::string& key, const Redactor& log)
{
    using nlohmann::json;
    const json body = {
        {"model", cfg.model},
        {"messages",
         json::array({{{"role", "user"},
                       {"content",
                        json::array({{{"type", "text"}, {"text", cfg.prompt}},
                                     {{"type", "image_url"},
                                      {"image_url", {{"url", "data:image/png;base64," + base64(encode_png(image))}}}}})}}})}};
    const std::string payload = body.dump();

    httplib::Client client(ep.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    const httplib::Headers headers{{"Authorization", "Bearer " + key}};

    auto delay = cfg.backoff;
    std::string last_failure;
    for (int attempt = 0;; ++attempt) {
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (res) {
            log("exemplar " + std::to_string(index) + ": POST " + ep.base + ep.path + " attempt " +
                std::to_string(attempt + 1) + " -> " + std::to_string(res->status));
            if (res->status == 401 || res->status == 403) {
                throw Error(ErrorKind::Credential, "endpoint rejected the API key (HTTP " +
                                                       std::to_string(res->status) + ")");
            }
            if (res->status >= 200 && res->status < 300) {
                try {
                    const auto j = json::parse(res->body);
                    Outcome o{j.at("choices").at(0).at("message").at("content").get<std::string>(),
                              static_cast<std::size_t>(attempt)};
                    log("exemplar " + std::to_string(index) + ": ok after retry count " + std::to_string(attempt));
                    return o;
                } catch (const json::exception&) {
                    throw Error(ErrorKind::Protocol, "malformed VLM response: " + excerpt(res->body));
                }
            }
            if (res->status < 500) {
                throw Error(ErrorKind::Protocol, "VLM request failed with HTTP " + std::to_string(res->status) + ": " +
                                                     excerpt(res->body));
            }
            last_failure = "HTTP " + std::to_string(res->status);
        } else {
            last_failure = httplib::to_string(res.error());
            log("exemplar " + std::to_string(index) + ": POST " + ep.base + ep.path + " attempt " +
                std::to_string(attempt + 1) + " -> " + last_failure);
        }
        if (attempt >= cfg.max_retries) {
            throw Error(ErrorKind::Transport, "VLM request failed after " + std::to_string(attempt) +
                                                  " retries: " + last_failure);
        }
        std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

} // namespace

std::size_t consensus_index(const std::vector<std::string>& texts)
{
    if (texts.empty()) {
        throw Error(ErrorKind::Argument, "no descriptions to aggregate");
    }
    std::vector<std::set<std::string>> toks;
    for (const auto& t : texts) {
        toks.push_back(tokens(t));
    }
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        double score = 0.0;
        for (std::size_t j = 0; j < texts.size(); ++j) {
            if (j != i) {
                score += jaccard(toks[i], toks[j]);
            }
        }
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

Description describe_concept(const std::vector<Bitmap>& exemplars, const VlmConfig& config)
{
    if (exemplars.empty()) {
        throw Error(ErrorKind::Argument, "describe_concept needs at least one exemplar");
    }
    if (config.prompt.empty()) {
        throw Error(ErrorKind::Argument, "VLM prompt must not be empty");
    }
    const Endpoint ep = split_endpoint(config.endpoint);
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error(ErrorKind::Credential, "API key variable " + config.api_key_env + " is not set");
    }
    const Redactor log(config.log, key);

    std::vector<Outcome> results(exemplars.size());
    std::vector<std::exception_ptr> errors(exemplars.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < exemplars.size(); i = next++) {
            try {
                results[i] = request_one(exemplars[i], i, config, ep, key, log);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(config.concurrency, 1, exemplars.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    Description d;
    for (const auto& r : results) {
        d.per_exemplar.push_back(r.text);
        d.retries += r.retries;
    }
    d.text = d.per_exemplar[consensus_index(d.per_exemplar)];
    log("consensus over " + std::to_string(d.per_exemplar.size()) + " descriptions: " + d.text);
    return d;
}

} // namespace blindspot::interp
