// SPDX-License-Identifier: Apache-2.0
#include <openssl/evp.h>

#include <json.hpp>

#include "numrep/elicitation.hpp"
#include "numrep/error.hpp"

namespace numrep::elicit {

std::string prompt_hash(std::string_view prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int k = 0; k < len; ++k) {
    out.push_back(kHex[digest[k] >> 4]);
    out.push_back(kHex[digest[k] & 0xf]);
  }
  return out;
}

std::string cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                      std::string_view run_id) {
  std::string key(model_id);
  key += '|';
  key += prompt_hash(prompt);
  key += '|';
  key += format_double(temperature);
  if (temperature > 0.0) {
    key += '|';
    key += run_id;
  }
  return key;
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto json = nlohmann::json::parse(line, nullptr, false);
      if (json.is_discarded() || !json.is_object()) {
        throw ParseError("cache line is not a JSON object", line_no);
      }
      if (!json.contains("cache_key") || !json.contains("raw_response") || !json.contains("ok")) {
        throw ParseError("cache line lacks cache_key/raw_response/ok", line_no);
      }
      if (json["ok"].get<bool>()) {
        hits_[json["cache_key"].get<std::string>()] = json["raw_response"].get<std::string>();
      }
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open cache " + path_.string() + " for appending");
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = hits_.find(key);
  if (it == hits_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::append(const std::string& key, const std::string& json_line, bool ok,
                           const std::string& raw_response) {
  std::lock_guard lock(mu_);
  out_ << json_line << '\n';
  out_.flush();
  if (ok) hits_[key] = raw_response;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return hits_.size();
}

}  // namespace numrep::elicit
