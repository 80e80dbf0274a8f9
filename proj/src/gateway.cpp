#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include "zpd/error.hpp"
#include "zpd/jsonl.hpp"
#include "zpd/prompt_gateway.hpp"
#include "zpd/util.hpp"

namespace zpd {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += v[i];
  }
  return out;
}

}  // namespace

struct Gateway::Impl {
  GatewayConfig cfg;
  std::mutex cache_mu;
  std::unordered_map<std::string, json> cache;  // key -> value payload
  std::ofstream cache_out;
  std::counting_semaphore<> in_flight;

  explicit Impl(GatewayConfig c) : cfg(std::move(c)), in_flight(std::max(1, cfg.max_in_flight)) {
    if (!cfg.cache_path.empty()) {
      std::ifstream probe(cfg.cache_path);
      if (probe.good()) {
        for_each_jsonl(cfg.cache_path, [&](const json& j, size_t) {
          cache[j.at("key").get<std::string>()] = j.at("value");
        });
      }
    }
    if (cfg.mode == GatewayMode::Live) {
      if (cfg.base_url.empty()) throw Error("gateway: live mode requires base_url");
      if (cfg.cache_path.empty()) throw Error("gateway: live mode requires cache_path");
      cache_out.open(cfg.cache_path, std::ios::app);
      if (!cache_out) throw Error("gateway: cannot open cache for append: " + cfg.cache_path);
    }
  }

  std::optional<json> lookup(const std::string& key) {
    std::lock_guard lock(cache_mu);
    auto it = cache.find(key);
    if (it == cache.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& key, const std::string& prompt_hash, const std::string& kind,
             const json& value) {
    std::lock_guard lock(cache_mu);
    if (cache.count(key)) return;
    cache[key] = value;
    if (cache_out.is_open()) {
      json line{{"key", key}, {"prompt_hash", prompt_hash}, {"kind", kind}, {"value", value}};
      cache_out << line.dump() << "\n";
      cache_out.flush();
    }
  }

  json post(const std::string& route, const json& body) {
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_s, 0);
    client.set_read_timeout(cfg.timeout_s, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const int attempts = cfg.retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      in_flight.acquire();
      auto res = client.Post(route, headers, body.dump(), "application/json");
      in_flight.release();
      if (res && res->status == 200) {
        try {
          return json::parse(res->body);
        } catch (const json::exception& e) {
          throw Error("gateway: bad response body from " + route + ": " + e.what());
        }
      }
      if (res && res->status == 404) {
        throw Error("gateway: endpoint does not support " + route + " (404)");
      }
      if (res && res->status >= 400 && res->status < 500) {
        throw Error("gateway: request rejected by " + route + " with status " +
                    std::to_string(res->status));
      }
      last_error = res ? "status " + std::to_string(res->status)
                       : "transport failure (" + httplib::to_string(res.error()) + ")";
      if (attempt < attempts) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    throw Error("gateway: " + route + " failed after " + std::to_string(attempts) +
                " attempts: " + last_error);
  }
};

Gateway::Gateway(GatewayConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Gateway::~Gateway() = default;

const std::string& Gateway::model() const { return impl_->cfg.model; }
const GatewayConfig& Gateway::config() const { return impl_->cfg; }

CompletionResult Gateway::complete(const std::string& prompt, const DecodeConfig& cfg) {
  if (cfg.max_new_tokens <= 0) throw Error("gateway: max_new_tokens must be > 0");
  const std::string material = std::string("complete\x1f") + impl_->cfg.model + "\x1f" + prompt +
                               "\x1f" + std::to_string(cfg.max_new_tokens) + "\x1f" +
                               format_double(cfg.temperature) + "\x1f" +
                               join(cfg.stop_sequences, '\x1e');
  const std::string key = sha256_hex(material);
  const std::string prompt_hash = sha256_hex(prompt);

  if (auto cached = impl_->lookup(key)) {
    CompletionResult r;
    r.text = cached->at("text").get<std::string>();
    r.token_count_prompt = cached->at("token_count_prompt").get<long>();
    r.token_count_output = cached->at("token_count_output").get<long>();
    r.source = CompletionSource::Replay;
    return r;
  }
  if (impl_->cfg.mode == GatewayMode::Replay) {
    throw Error("gateway: replay cache miss for completion (prompt hash " + prompt_hash + ")");
  }

  json body{{"model", impl_->cfg.model},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"max_tokens", cfg.max_new_tokens},
            {"temperature", cfg.temperature}};
  if (!cfg.stop_sequences.empty()) body["stop"] = cfg.stop_sequences;
  const json resp = impl_->post("/v1/chat/completions", body);

  CompletionResult r;
  try {
    r.text = resp.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("gateway: malformed chat completion response: ") + e.what());
  }
  r.token_count_prompt = count_tokens(prompt);
  r.token_count_output = count_tokens(r.text);
  if (resp.contains("usage")) {
    const auto& usage = resp["usage"];
    if (usage.contains("prompt_tokens")) r.token_count_prompt = usage["prompt_tokens"].get<long>();
    if (usage.contains("completion_tokens")) {
      r.token_count_output = usage["completion_tokens"].get<long>();
    }
  }
  r.source = CompletionSource::Live;

  json value{{"text", r.text},
             {"token_count_prompt", r.token_count_prompt},
             {"token_count_output", r.token_count_output}};
  impl_->store(key, prompt_hash, "complete", value);
  return r;
}

double Gateway::loglikelihood(const std::string& prompt, const std::string& continuation) {
  if (continuation.empty()) return 0.0;  // empty sum of token log-probs

  const std::string mode = impl_->cfg.loglik_mean ? "mean" : "sum";
  const std::string material = std::string("loglik\x1f") + impl_->cfg.model + "\x1f" + prompt +
                               "\x1f" + continuation + "\x1f" + mode;
  const std::string key = sha256_hex(material);
  const std::string prompt_hash = sha256_hex(prompt);

  if (auto cached = impl_->lookup(key)) return cached->get<double>();
  if (impl_->cfg.mode == GatewayMode::Replay) {
    throw Error("gateway: replay cache miss for loglikelihood (prompt hash " + prompt_hash + ")");
  }

  json body{{"model", impl_->cfg.model}, {"prompt", prompt}, {"continuation", continuation}};
  const json resp = impl_->post("/v1/loglikelihood", body);

  double value = 0.0;
  if (resp.contains("token_logprobs")) {
    const auto& lps = resp["token_logprobs"];
    double sum = 0.0;
    for (const auto& lp : lps) sum += lp.get<double>();
    value = impl_->cfg.loglik_mean && !lps.empty() ? sum / static_cast<double>(lps.size()) : sum;
  } else if (resp.contains("loglikelihood")) {
    value = resp["loglikelihood"].get<double>();
  } else {
    throw Error("gateway: scoring response carries neither loglikelihood nor token_logprobs");
  }

  impl_->store(key, prompt_hash, "loglik", json(value));
  return value;
}

}  // namespace zpd
