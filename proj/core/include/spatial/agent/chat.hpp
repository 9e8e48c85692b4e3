#pragma once

#include "spatial/image.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace spatial::agent {

struct ContentPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  std::shared_ptr<const Image> image;

  static ContentPart from_text(std::string text);
  static ContentPart from_image(std::shared_ptr<const Image> image);
};

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  /// Ask for a JSON object {"reasoning", "code"} where the endpoint supports it.
  bool structured_output = false;

  std::size_t image_count() const;
  /// Every text part, joined with newlines.
  std::string text() const;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  double latency_seconds = 0.0;
};

/// Implementations must be safe to call from several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
  virtual std::size_t max_images() const { return 64; }
};

/// Throws invalid_argument when the request carries more images than the
/// client accepts.
void check_attachments(const ChatRequest& request, std::size_t max_images);

/// SHA-256 (hex) over a canonical serialization of the request: model,
/// decoding settings, roles, text, and each image's size and pixel hash.
std::string request_digest(const ChatRequest& request);

/// Standard base64 of the PNG encoding, as a data: URL.
std::string image_data_url(const Image& image);

struct OpenAIConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  double timeout_seconds = 120.0;
  int max_attempts = 5;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  std::size_t max_images = 64;
};

/// OPENAI_API_KEY and OPENAI_BASE_URL override the fields when set.
OpenAIConfig with_environment(OpenAIConfig config);

/// Chat-completions over HTTP(S). 429 and 5xx responses and dropped
/// connections are retried with exponential backoff; exhausting the attempts
/// raises transport_failure naming the last status. 401/403 raise
/// auth_failure immediately; other statuses raise transport_failure.
class OpenAIClient : public ChatClient {
 public:
  using Sleeper = std::function<void(double seconds)>;

  explicit OpenAIClient(OpenAIConfig config, Sleeper sleeper = {});

  ChatResponse send(const ChatRequest& request) override;
  std::size_t max_images() const override { return config_.max_images; }

  /// The JSON body sent for `request`.
  static std::string request_body(const ChatRequest& request);

 private:
  OpenAIConfig config_;
  Sleeper sleeper_;
};

struct MockEntry {
  std::string digest;  // hex digest, or "*" to match any request
  std::string response_text;
  /// For "*" entries: substrings that must all occur in the request text.
  std::vector<std::string> contains;
};

/// One JSON object per line: {"digest", "response_text", optional "contains"}.
/// Throws invalid_argument naming the bad line.
std::vector<MockEntry> read_mock_entries(const std::filesystem::path& path);

/// Replays fixture responses. An exact digest match wins; otherwise the "*"
/// entry with the most `contains` terms that all match (earliest on ties).
/// No match raises transport_failure.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::vector<MockEntry> entries, std::size_t max_images = 64);

  static MockChatClient from_jsonl(const std::filesystem::path& path);

  ChatResponse send(const ChatRequest& request) override;
  std::size_t max_images() const override { return max_images_; }

  std::size_t request_count() const { return requests_.load(); }

 private:
  std::vector<MockEntry> entries_;
  std::size_t max_images_;
  std::atomic<std::size_t> requests_{0};
};

/// Forwards to another client and appends {"digest", "response_text"} for
/// every exchange to a JSONL file usable by MockChatClient.
class RecordingChatClient : public ChatClient {
 public:
  RecordingChatClient(ChatClient& inner, std::filesystem::path path);

  ChatResponse send(const ChatRequest& request) override;
  std::size_t max_images() const override { return inner_.max_images(); }

 private:
  ChatClient& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

}  // namespace spatial::agent
