#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlnmine/errors.hpp"

namespace vlnmine {

struct PromptExample {
  std::string input;
  std::string output;
};

// Task instruction plus in-context examples; the prediction block is built
// per record. Shipped as a user-editable JSON asset.
struct PromptBundle {
  std::string task_instruction;
  std::vector<PromptExample> examples;
};

PromptBundle load_prompt_bundle(const std::filesystem::path& path);

struct FrameDescription {
  int frame_index = 0;
  std::string room;
  std::vector<std::string> captions;
};

// Deterministic task-instruction / examples / prediction concatenation.
// Frames render as "Frame k (room): caption; caption; ...".
std::string build_prompt(std::span<const FrameDescription> frames,
                         const PromptBundle& bundle);

struct ClientConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8089/v1/chat/completions
  std::string model = "gpt-4-turbo";
  double temperature = 0.7;
  int max_tokens = 512;
  int max_attempts = 5;
  int backoff_base_ms = 1000;
  int backoff_max_ms = 30000;
  int timeout_s = 30;
  std::string credential_env = "VLNMINE_API_KEY";  // empty: no auth header
};

struct CompletionResult {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
  int attempts = 0;
};

// One chat completion with exponential backoff on transient failures
// (connection errors, timeouts, 429, 5xx). Other 4xx raise RequestRejected
// without retrying; exhausted attempts raise ServiceUnavailable; a missing
// credential raises ConfigError before any request is sent.
CompletionResult generate_instruction(const std::string& prompt,
                                      const ClientConfig& config);

struct BatchItem {
  std::string record_id;
  std::string prompt;
};

struct BatchReport {
  std::size_t requested = 0;
  std::size_t skipped = 0;    // already completed in the results file
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // id, error
};

// Runs items with at most `concurrency` requests in flight, appending one
// JSON line per outcome to `results_file` as soon as it lands. Reruns skip
// record ids already marked ok, so a finished batch issues zero requests.
BatchReport generate_batch(std::span<const BatchItem> items,
                           const ClientConfig& config, int concurrency,
                           const std::filesystem::path& results_file);

struct InstructionResult {
  std::string text;
  std::string model;
  double temperature = 0.0;
  std::string prompt_hash;
  int attempts = 0;
};

// Successful completions from a results file, keyed by record id.
std::map<std::string, InstructionResult> load_instruction_results(
    const std::filesystem::path& path);

}  // namespace vlnmine
