#include "spatial/agent/chat.hpp"

#include "spatial/error.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace spatial::agent {

using nlohmann::json;

ContentPart ContentPart::from_text(std::string text) {
  ContentPart p;
  p.kind = Kind::text;
  p.text = std::move(text);
  return p;
}

ContentPart ContentPart::from_image(std::shared_ptr<const Image> image) {
  if (!image) throw Error(ErrorCode::invalid_argument, "null image attachment");
  ContentPart p;
  p.kind = Kind::image;
  p.image = std::move(image);
  return p;
}

std::size_t ChatRequest::image_count() const {
  std::size_t n = 0;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) n += p.kind == ContentPart::Kind::image;
  }
  return n;
}

std::string ChatRequest::text() const {
  std::string out;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (p.kind != ContentPart::Kind::text) continue;
      if (!out.empty()) out += '\n';
      out += p.text;
    }
  }
  return out;
}

void check_attachments(const ChatRequest& request, std::size_t max_images) {
  const std::size_t n = request.image_count();
  if (n > max_images) {
    throw Error(ErrorCode::invalid_argument,
                "request carries " + std::to_string(n) + " images; the client accepts at most " +
                    std::to_string(max_images));
  }
}

namespace {

std::string sha256_hex(const void* data, std::size_t size, EVP_MD_CTX* ctx = nullptr) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (ctx) {
    EVP_DigestUpdate(ctx, data, size);
    EVP_DigestFinal_ex(ctx, digest, &len);
  } else {
    EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr);
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string image_hash(const Image& image) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  const std::int32_t dims[2] = {image.width, image.height};
  EVP_DigestUpdate(ctx.get(), dims, sizeof(dims));
  return sha256_hex(image.rgb.data(), image.rgb.size(), ctx.get());
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace

std::string request_digest(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::text) {
        parts.push_back({{"text", p.text}});
      } else {
        parts.push_back({{"image", image_hash(*p.image)}});
      }
    }
    messages.push_back({{"role", m.role}, {"parts", std::move(parts)}});
  }
  const json canonical = {{"model", request.model},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_tokens},
                          {"structured_output", request.structured_output},
                          {"messages", std::move(messages)}};
  const std::string text = canonical.dump();
  return sha256_hex(text.data(), text.size());
}

std::string image_data_url(const Image& image) {
  return "data:image/png;base64," + base64(encode_png(image));
}

OpenAIConfig with_environment(OpenAIConfig config) {
  if (const char* key = std::getenv("OPENAI_API_KEY"); key && *key) config.api_key = key;
  if (const char* url = std::getenv("OPENAI_BASE_URL"); url && *url) config.base_url = url;
  return config;
}

OpenAIClient::OpenAIClient(OpenAIConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (config_.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be at least 1");
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

std::string OpenAIClient::request_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::text) {
        content.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_data_url(*p.image)}}}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (request.structured_output) {
    body["response_format"] = {
        {"type", "json_schema"},
        {"json_schema",
         {{"name", "program"},
          {"strict", true},
          {"schema",
           {{"type", "object"},
            {"properties", {{"reasoning", {{"type", "string"}}}, {"code", {{"type", "string"}}}}},
            {"required", {"reasoning", "code"}},
            {"additionalProperties", false}}}}}};
  }
  return body.dump();
}

namespace {

ChatResponse parse_completion(const std::string& body) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    ChatResponse r;
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") r.text += part.value("text", "");
      }
    } else if (!content.is_null()) {
      throw Error(ErrorCode::transport_failure, "completion content is neither text nor parts");
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport_failure, std::string("malformed completion response: ") + e.what());
  }
}

std::string excerpt(const std::string& body) {
  return body.size() > 200 ? body.substr(0, 200) + "..." : body;
}

}  // namespace

ChatResponse OpenAIClient::send(const ChatRequest& request) {
  check_attachments(request, config_.max_images);
  if (config_.api_key.empty()) {
    throw Error(ErrorCode::auth_failure, "no API key configured (set OPENAI_API_KEY)");
  }
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "base URL '" + config_.base_url + "' must start with http:// or https://");
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  const std::string host = config_.base_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  path += "/chat/completions";

  const std::string body = request_body(request);
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(host);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  const httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

  std::string last;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last = "connection error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      ChatResponse r = parse_completion(res->body);
      r.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return r;
    } else if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::auth_failure, "chat endpoint rejected the credential (HTTP " +
                                               std::to_string(res->status) + "): " + excerpt(res->body));
    } else if (res->status == 429 || res->status >= 500) {
      last = "HTTP " + std::to_string(res->status);
    } else {
      throw Error(ErrorCode::transport_failure,
                  "chat endpoint returned HTTP " + std::to_string(res->status) + ": " + excerpt(res->body));
    }
    if (attempt < config_.max_attempts) {
      sleeper_(config_.backoff_base_seconds * std::pow(config_.backoff_factor, attempt - 1));
    }
  }
  throw Error(ErrorCode::transport_failure,
              "chat request failed after " + std::to_string(config_.max_attempts) + " attempts; last: " + last);
}

MockChatClient::MockChatClient(std::vector<MockEntry> entries, std::size_t max_images)
    : entries_(std::move(entries)), max_images_(max_images) {}

std::vector<MockEntry> read_mock_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_file, "cannot open mock fixture " + path.string());
  std::vector<MockEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      MockEntry e;
      e.digest = j.at("digest").get<std::string>();
      e.response_text = j.at("response_text").get<std::string>();
      if (j.contains("contains")) e.contains = j["contains"].get<std::vector<std::string>>();
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_argument,
                  path.string() + ":" + std::to_string(line_no) + ": bad mock entry: " + e.what());
    }
  }
  return entries;
}

MockChatClient MockChatClient::from_jsonl(const std::filesystem::path& path) {
  return MockChatClient(read_mock_entries(path));
}

ChatResponse MockChatClient::send(const ChatRequest& request) {
  check_attachments(request, max_images_);
  ++requests_;
  const std::string digest = request_digest(request);
  for (const auto& e : entries_) {
    if (e.digest == digest) return ChatResponse{e.response_text, {}, 0.0};
  }
  const std::string text = request.text();
  const MockEntry* best = nullptr;
  for (const auto& e : entries_) {
    if (e.digest != "*") continue;
    bool all = true;
    for (const auto& term : e.contains) all = all && text.find(term) != std::string::npos;
    if (all && (!best || e.contains.size() > best->contains.size())) best = &e;
  }
  if (!best) throw Error(ErrorCode::transport_failure, "mock client has no response for request " + digest);
  return ChatResponse{best->response_text, {}, 0.0};
}

RecordingChatClient::RecordingChatClient(ChatClient& inner, std::filesystem::path path)
    : inner_(inner), path_(std::move(path)) {}

ChatResponse RecordingChatClient::send(const ChatRequest& request) {
  ChatResponse r = inner_.send(request);
  const json line = {{"digest", request_digest(request)}, {"response_text", r.text}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::io_error, "cannot append to " + path_.string());
  out << line.dump() << '\n';
  return r;
}

}  // namespace spatial::agent
