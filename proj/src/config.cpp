#include "vlnmine/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "vlnmine/annotate.hpp"
#include "vlnmine/hash.hpp"

namespace vlnmine {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value +
                      "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value +
                      "'");
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

std::string canonical(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

PipelineConfig::PipelineConfig() {
  room_types.assign(kRoomTypes.begin(), kRoomTypes.end());
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  PipelineConfig cfg;

  const std::map<std::string, std::function<void(const std::string&,
                                                 const std::string&)>>
      setters = {
          {"models_dir", [&](const auto&, const auto& v) { cfg.models_dir = v; }},
          {"annotations_dir",
           [&](const auto&, const auto& v) { cfg.annotations_dir = v; }},
          {"output_dir", [&](const auto&, const auto& v) { cfg.output_dir = v; }},
          {"prompt_template",
           [&](const auto&, const auto& v) { cfg.prompt_template = v; }},
          {"path_records",
           [&](const auto&, const auto& v) { cfg.path_records = v; }},
          {"profile", [&](const auto&, const auto& v) { cfg.profile = v; }},
          {"fps", [&](const auto& k, const auto& v) { cfg.fps = parse_double(k, v); }},
          {"min_duration_s",
           [&](const auto& k, const auto& v) { cfg.min_duration_s = parse_double(k, v); }},
          {"min_shots",
           [&](const auto& k, const auto& v) { cfg.min_shots = parse_int(k, v); }},
          {"min_coverage",
           [&](const auto& k, const auto& v) { cfg.min_coverage = parse_double(k, v); }},
          {"min_shared_frames",
           [&](const auto& k, const auto& v) { cfg.min_shared_frames = parse_int(k, v); }},
          {"clip_length_s",
           [&](const auto& k, const auto& v) { cfg.clip_length_s = parse_double(k, v); }},
          {"clip_overlap_s",
           [&](const auto& k, const auto& v) { cfg.clip_overlap_s = parse_double(k, v); }},
          {"model_format",
           [&](const auto&, const auto& v) { cfg.model_format = v; }},
          {"walking_speed_mps",
           [&](const auto& k, const auto& v) { cfg.walking_speed_mps = parse_double(k, v); }},
          {"stillness_floor_ratio",
           [&](const auto& k, const auto& v) {
             cfg.stillness_floor_ratio = parse_double(k, v);
           }},
          {"turn_threshold_deg",
           [&](const auto& k, const auto& v) { cfg.turn_threshold_deg = parse_double(k, v); }},
          {"lookahead_frames",
           [&](const auto& k, const auto& v) { cfg.lookahead_frames = parse_int(k, v); }},
          {"nms_window",
           [&](const auto& k, const auto& v) { cfg.nms_window = parse_int(k, v); }},
          {"dbscan_eps_m",
           [&](const auto& k, const auto& v) { cfg.dbscan_eps_m = parse_double(k, v); }},
          {"dbscan_min_pts",
           [&](const auto& k, const auto& v) { cfg.dbscan_min_pts = parse_int(k, v); }},
          {"step_interval_m",
           [&](const auto& k, const auto& v) { cfg.step_interval_m = parse_double(k, v); }},
          {"description_period_s",
           [&](const auto& k, const auto& v) {
             cfg.description_period_s = parse_double(k, v);
           }},
          {"max_negatives",
           [&](const auto& k, const auto& v) { cfg.max_negatives = parse_int(k, v); }},
          {"revisit_gap_frames",
           [&](const auto& k, const auto& v) { cfg.revisit_gap_frames = parse_int(k, v); }},
          {"overlap_threshold",
           [&](const auto& k, const auto& v) { cfg.overlap_threshold = parse_double(k, v); }},
          {"room_smoothing_window",
           [&](const auto& k, const auto& v) {
             cfg.room_smoothing_window = parse_int(k, v);
           }},
          {"room_types",
           [&](const auto&, const auto& v) { cfg.room_types = parse_list(v); }},
          {"endpoint_url",
           [&](const auto&, const auto& v) { cfg.endpoint_url = v; }},
          {"model", [&](const auto&, const auto& v) { cfg.model = v; }},
          {"temperature",
           [&](const auto& k, const auto& v) { cfg.temperature = parse_double(k, v); }},
          {"max_tokens",
           [&](const auto& k, const auto& v) { cfg.max_tokens = parse_int(k, v); }},
          {"max_attempts",
           [&](const auto& k, const auto& v) { cfg.max_attempts = parse_int(k, v); }},
          {"backoff_base_ms",
           [&](const auto& k, const auto& v) { cfg.backoff_base_ms = parse_int(k, v); }},
          {"backoff_max_ms",
           [&](const auto& k, const auto& v) { cfg.backoff_max_ms = parse_int(k, v); }},
          {"request_timeout_s",
           [&](const auto& k, const auto& v) { cfg.request_timeout_s = parse_int(k, v); }},
          {"concurrency",
           [&](const auto& k, const auto& v) { cfg.concurrency = parse_int(k, v); }},
          {"credential_env",
           [&](const auto&, const auto& v) { cfg.credential_env = v; }},
          {"success_threshold_m",
           [&](const auto& k, const auto& v) {
             cfg.success_threshold_m = parse_double(k, v);
           }},
          {"workers",
           [&](const auto& k, const auto& v) { cfg.workers = parse_int(k, v); }},
      };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) {
      line = line.substr(0, hash_pos);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.starts_with("scale_override.")) {
      const std::string video = key.substr(std::string("scale_override.").size());
      if (video.empty()) {
        throw ConfigError("key '" + key + "': missing video id");
      }
      cfg.scale_overrides[video] = parse_double(key, value);
      continue;
    }
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    }
    it->second(key, value);
  }

  validate_config(cfg);
  return cfg;
}

void validate_config(const PipelineConfig& cfg) {
  const auto require = [](bool ok, const std::string& message) {
    if (!ok) {
      throw ConfigError(message);
    }
  };
  require(cfg.fps > 0, "key 'fps': must be positive");
  require(cfg.min_duration_s >= 0, "key 'min_duration_s': must be >= 0");
  require(cfg.min_shots >= 1, "key 'min_shots': must be >= 1");
  require(cfg.min_coverage >= 0 && cfg.min_coverage < 1,
          "key 'min_coverage': must be in [0, 1)");
  require(cfg.min_shared_frames >= 1, "key 'min_shared_frames': must be >= 1");
  require(cfg.clip_length_s > 0, "key 'clip_length_s': must be positive");
  require(cfg.clip_overlap_s >= 0 && cfg.clip_overlap_s < cfg.clip_length_s,
          "key 'clip_overlap_s': must be in [0, clip_length_s)");
  require(cfg.model_format == "binary" || cfg.model_format == "text",
          "key 'model_format': must be 'binary' or 'text'");
  require(cfg.walking_speed_mps > 0, "key 'walking_speed_mps': must be positive");
  require(cfg.stillness_floor_ratio >= 0 && cfg.stillness_floor_ratio < 1,
          "key 'stillness_floor_ratio': must be in [0, 1)");
  require(cfg.turn_threshold_deg > 0 && cfg.turn_threshold_deg < 180,
          "key 'turn_threshold_deg': must be in (0, 180)");
  require(cfg.lookahead_frames >= 1, "key 'lookahead_frames': must be >= 1");
  require(cfg.nms_window >= 1, "key 'nms_window': must be >= 1");
  require(cfg.dbscan_eps_m > 0, "key 'dbscan_eps_m': must be positive");
  require(cfg.dbscan_min_pts >= 1, "key 'dbscan_min_pts': must be >= 1");
  require(cfg.step_interval_m > 0, "key 'step_interval_m': must be positive");
  require(cfg.description_period_s > 0,
          "key 'description_period_s': must be positive");
  require(cfg.max_negatives >= 1, "key 'max_negatives': must be >= 1");
  require(cfg.revisit_gap_frames >= 1, "key 'revisit_gap_frames': must be >= 1");
  require(cfg.overlap_threshold > 0 && cfg.overlap_threshold < 1,
          "key 'overlap_threshold': must be in (0, 1)");
  require(cfg.room_smoothing_window >= 1 && cfg.room_smoothing_window % 2 == 1,
          "key 'room_smoothing_window': must be odd and >= 1");
  require(!cfg.room_types.empty(), "key 'room_types': must not be empty");
  require(cfg.temperature >= 0, "key 'temperature': must be >= 0");
  require(cfg.max_tokens >= 1, "key 'max_tokens': must be >= 1");
  require(cfg.max_attempts >= 1, "key 'max_attempts': must be >= 1");
  require(cfg.backoff_base_ms >= 0, "key 'backoff_base_ms': must be >= 0");
  require(cfg.backoff_max_ms >= cfg.backoff_base_ms,
          "key 'backoff_max_ms': must be >= backoff_base_ms");
  require(cfg.request_timeout_s >= 1, "key 'request_timeout_s': must be >= 1");
  require(cfg.concurrency >= 1, "key 'concurrency': must be >= 1");
  require(cfg.workers >= 1, "key 'workers': must be >= 1");
  require(cfg.success_threshold_m > 0,
          "key 'success_threshold_m': must be positive");
  require(cfg.profile == "production" || cfg.profile == "test",
          "key 'profile': must be 'production' or 'test'");
  for (const auto& [video, scale] : cfg.scale_overrides) {
    require(scale > 0, "key 'scale_override." + video + "': must be positive");
  }
}

std::string PipelineConfig::semantic_hash() const {
  std::ostringstream os;
  os << "fps=" << canonical(fps) << '\n'
     << "min_duration_s=" << canonical(min_duration_s) << '\n'
     << "min_shots=" << min_shots << '\n'
     << "min_coverage=" << canonical(min_coverage) << '\n'
     << "min_shared_frames=" << min_shared_frames << '\n'
     << "clip_length_s=" << canonical(clip_length_s) << '\n'
     << "clip_overlap_s=" << canonical(clip_overlap_s) << '\n'
     << "walking_speed_mps=" << canonical(walking_speed_mps) << '\n'
     << "stillness_floor_ratio=" << canonical(stillness_floor_ratio) << '\n'
     << "turn_threshold_deg=" << canonical(turn_threshold_deg) << '\n'
     << "lookahead_frames=" << lookahead_frames << '\n'
     << "nms_window=" << nms_window << '\n'
     << "dbscan_eps_m=" << canonical(dbscan_eps_m) << '\n'
     << "dbscan_min_pts=" << dbscan_min_pts << '\n'
     << "step_interval_m=" << canonical(step_interval_m) << '\n'
     << "description_period_s=" << canonical(description_period_s) << '\n'
     << "max_negatives=" << max_negatives << '\n'
     << "revisit_gap_frames=" << revisit_gap_frames << '\n'
     << "overlap_threshold=" << canonical(overlap_threshold) << '\n'
     << "room_smoothing_window=" << room_smoothing_window << '\n'
     << "success_threshold_m=" << canonical(success_threshold_m) << '\n'
     << "model=" << model << '\n'
     << "temperature=" << canonical(temperature) << '\n'
     << "max_tokens=" << max_tokens << '\n';
  os << "room_types=";
  for (const auto& room : room_types) {
    os << room << ',';
  }
  os << '\n';
  for (const auto& [video, scale] : scale_overrides) {
    os << "scale_override." << video << '=' << canonical(scale) << '\n';
  }
  return fnv1a64_hex(os.str());
}

nlohmann::ordered_json PipelineConfig::snapshot() const {
  nlohmann::ordered_json j;
  j["models_dir"] = models_dir.string();
  j["annotations_dir"] = annotations_dir.string();
  j["output_dir"] = output_dir.string();
  j["prompt_template"] = prompt_template.string();
  j["path_records"] = path_records.string();
  j["profile"] = profile;
  j["fps"] = fps;
  j["min_duration_s"] = min_duration_s;
  j["min_shots"] = min_shots;
  j["min_coverage"] = min_coverage;
  j["min_shared_frames"] = min_shared_frames;
  j["clip_length_s"] = clip_length_s;
  j["clip_overlap_s"] = clip_overlap_s;
  j["model_format"] = model_format;
  j["walking_speed_mps"] = walking_speed_mps;
  j["stillness_floor_ratio"] = stillness_floor_ratio;
  j["turn_threshold_deg"] = turn_threshold_deg;
  j["lookahead_frames"] = lookahead_frames;
  j["nms_window"] = nms_window;
  j["dbscan_eps_m"] = dbscan_eps_m;
  j["dbscan_min_pts"] = dbscan_min_pts;
  j["step_interval_m"] = step_interval_m;
  j["description_period_s"] = description_period_s;
  j["max_negatives"] = max_negatives;
  j["revisit_gap_frames"] = revisit_gap_frames;
  j["overlap_threshold"] = overlap_threshold;
  j["room_smoothing_window"] = room_smoothing_window;
  j["room_types"] = room_types;
  j["endpoint_url"] = endpoint_url;
  j["model"] = model;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["max_attempts"] = max_attempts;
  j["backoff_base_ms"] = backoff_base_ms;
  j["backoff_max_ms"] = backoff_max_ms;
  j["request_timeout_s"] = request_timeout_s;
  j["concurrency"] = concurrency;
  j["credential_env"] = credential_env;
  j["success_threshold_m"] = success_threshold_m;
  j["workers"] = workers;
  nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
  for (const auto& [video, scale] : scale_overrides) {
    overrides[video] = scale;
  }
  j["scale_overrides"] = overrides;
  j["semantic_hash"] = semantic_hash();
  return j;
}

}  // namespace vlnmine
