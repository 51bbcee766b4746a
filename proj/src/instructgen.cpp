#include "vlnmine/instructgen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vlnmine/hash.hpp"
#include "vlnmine/log.hpp"

namespace vlnmine {
namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint_url '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

int backoff_ms(const ClientConfig& config, int attempt) {
  const std::int64_t base = config.backoff_base_ms;
  std::int64_t delay = base << std::min(attempt - 1, 24);
  delay = std::min<std::int64_t>(delay, config.backoff_max_ms);
  if (base > 0) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_int_distribution<std::int64_t> jitter(0, base);
    delay = std::min<std::int64_t>(delay + jitter(rng), config.backoff_max_ms);
  }
  return static_cast<int>(delay);
}

bool transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

PromptBundle load_prompt_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open prompt template " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& err) {
    throw ConfigError(path.string() + ": " + err.what());
  }
  PromptBundle bundle;
  if (!doc.contains("task_instruction") ||
      !doc["task_instruction"].is_string()) {
    throw ConfigError(path.string() + ": task_instruction required");
  }
  bundle.task_instruction = doc["task_instruction"].get<std::string>();
  if (doc.contains("examples")) {
    for (const auto& example : doc["examples"]) {
      if (!example.contains("input") || !example.contains("output")) {
        throw ConfigError(path.string() +
                          ": each example needs input and output");
      }
      bundle.examples.push_back({example["input"].get<std::string>(),
                                 example["output"].get<std::string>()});
    }
  }
  return bundle;
}

std::string build_prompt(std::span<const FrameDescription> frames,
                         const PromptBundle& bundle) {
  if (frames.empty()) {
    throw EmptyTrajectory("cannot build a prompt from zero frames");
  }
  std::string prompt = bundle.task_instruction;
  prompt += "\n";
  for (const PromptExample& example : bundle.examples) {
    prompt += "\nInput:\n";
    prompt += example.input;
    prompt += "\nOutput:\n";
    prompt += example.output;
    prompt += "\n";
  }
  prompt += "\nInput:\n";
  for (const FrameDescription& frame : frames) {
    prompt += "Frame " + std::to_string(frame.frame_index) + " (" +
              frame.room + "):";
    for (std::size_t i = 0; i < frame.captions.size(); ++i) {
      prompt += i == 0 ? " " : "; ";
      prompt += frame.captions[i];
    }
    prompt += "\n";
  }
  prompt += "Output:\n";
  return prompt;
}

CompletionResult generate_instruction(const std::string& prompt,
                                      const ClientConfig& config) {
  std::string credential;
  if (!config.credential_env.empty()) {
    const char* value = std::getenv(config.credential_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw ConfigError("credential environment variable '" +
                        config.credential_env + "' is not set");
    }
    credential = value;
  }
  if (config.endpoint_url.empty()) {
    throw ConfigError("endpoint_url is not configured");
  }
  const ParsedUrl url = parse_url(config.endpoint_url);

  json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!credential.empty()) {
    headers.emplace("Authorization", "Bearer " + credential);
  }

  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    httplib::Client client(url.origin);
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    client.set_write_timeout(config.timeout_s, 0);

    auto res = client.Post(url.path, headers, payload, "application/json");
    if (res && res->status == 200) {
      json doc;
      try {
        doc = json::parse(res->body);
      } catch (const json::parse_error& err) {
        throw RequestRejected(std::string("unparseable response body: ") +
                              err.what());
      }
      if (!doc.contains("choices") || !doc["choices"].is_array() ||
          doc["choices"].empty() ||
          !doc["choices"][0].contains("message") ||
          !doc["choices"][0]["message"].contains("content")) {
        throw RequestRejected("response lacks choices[0].message.content");
      }
      CompletionResult result;
      result.text = doc["choices"][0]["message"]["content"].get<std::string>();
      if (result.text.empty()) {
        throw RequestRejected("response text is empty");
      }
      if (doc.contains("usage")) {
        result.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        result.completion_tokens = doc["usage"].value("completion_tokens", 0);
      }
      result.attempts = attempt;
      result.latency_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - started)
              .count();
      return result;
    }

    if (res && !transient_status(res->status)) {
      throw RequestRejected("endpoint returned status " +
                            std::to_string(res->status));
    }
    last_error = res ? "status " + std::to_string(res->status)
                     : "transport error " + httplib::to_string(res.error());
    if (attempt < config.max_attempts) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_ms(config, attempt)));
    }
  }
  throw ServiceUnavailable("gave up after " +
                           std::to_string(config.max_attempts) +
                           " attempts; last failure: " + last_error);
}

BatchReport generate_batch(std::span<const BatchItem> items,
                           const ClientConfig& config, int concurrency,
                           const std::filesystem::path& results_file) {
  if (concurrency < 1) {
    throw InvalidInput("concurrency must be >= 1");
  }
  // Fail before any request if the credential is missing.
  if (!config.credential_env.empty() &&
      std::getenv(config.credential_env.c_str()) == nullptr) {
    throw ConfigError("credential environment variable '" +
                      config.credential_env + "' is not set");
  }

  BatchReport report;
  report.requested = items.size();

  const auto done = load_instruction_results(results_file);
  std::vector<const BatchItem*> pending;
  for (const BatchItem& item : items) {
    if (done.count(item.record_id) > 0) {
      ++report.skipped;
    } else {
      pending.push_back(&item);
    }
  }
  if (pending.empty()) {
    return report;
  }

  if (!results_file.parent_path().empty()) {
    std::filesystem::create_directories(results_file.parent_path());
  }
  // A crash can leave a torn final line without a newline; terminate it so
  // appended records stay parseable.
  bool needs_newline = false;
  {
    std::ifstream existing(results_file, std::ios::binary);
    if (existing) {
      existing.seekg(0, std::ios::end);
      if (existing.tellg() > 0) {
        existing.seekg(-1, std::ios::end);
        needs_newline = existing.get() != '\n';
      }
    }
  }
  std::ofstream sink(results_file, std::ios::app);
  if (!sink) {
    throw IoError("cannot open results file " + results_file.string());
  }
  if (needs_newline) {
    sink << '\n';
  }

  std::mutex sink_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> succeeded{0};
  std::vector<std::pair<std::string, std::string>> failures;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) {
        return;
      }
      const BatchItem& item = *pending[i];
      json line;
      line["record_id"] = item.record_id;
      try {
        const CompletionResult result = generate_instruction(item.prompt, config);
        line["status"] = "ok";
        line["instruction"] = result.text;
        line["model"] = config.model;
        line["temperature"] = config.temperature;
        line["prompt_hash"] = fnv1a64_hex(item.prompt);
        line["attempts"] = result.attempts;
        line["latency_ms"] = result.latency_ms;
        line["prompt_tokens"] = result.prompt_tokens;
        line["completion_tokens"] = result.completion_tokens;
        line["completed_unix"] =
            std::chrono::duration<double>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
        succeeded.fetch_add(1);
      } catch (const Error& err) {
        line["status"] = "failed";
        line["error_class"] =
            dynamic_cast<const RequestRejected*>(&err) != nullptr
                ? "request_rejected"
            : dynamic_cast<const ServiceUnavailable*>(&err) != nullptr
                ? "service_unavailable"
                : "config_error";
        line["error"] = err.what();
        std::lock_guard<std::mutex> lock(sink_mutex);
        failures.emplace_back(item.record_id, err.what());
      }
      {
        std::lock_guard<std::mutex> lock(sink_mutex);
        sink << line.dump() << '\n';
        sink.flush();
      }
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(concurrency),
                            pending.size());
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  for (std::thread& t : pool) {
    t.join();
  }

  report.succeeded = succeeded.load();
  report.failed = failures.size();
  report.failures = std::move(failures);
  std::sort(report.failures.begin(), report.failures.end());
  return report;
}

std::map<std::string, InstructionResult> load_instruction_results(
    const std::filesystem::path& path) {
  std::map<std::string, InstructionResult> results;
  std::ifstream in(path);
  if (!in) {
    return results;  // nothing completed yet
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error&) {
      log::warn("instruct.results_line_skipped",
                {{"file", path.string()}, {"line", std::to_string(lineno)}});
      continue;  // torn line from a crashed run
    }
    if (doc.value("status", "") != "ok") {
      continue;
    }
    InstructionResult result;
    result.text = doc.value("instruction", "");
    result.model = doc.value("model", "");
    result.temperature = doc.value("temperature", 0.0);
    result.prompt_hash = doc.value("prompt_hash", "");
    result.attempts = doc.value("attempts", 0);
    if (!result.text.empty() && doc.contains("record_id")) {
      results[doc["record_id"].get<std::string>()] = std::move(result);
    }
  }
  return results;
}

}  // namespace vlnmine
