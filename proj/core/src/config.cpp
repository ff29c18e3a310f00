#include "specsim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include "specsim/errors.hpp"

namespace specsim {

namespace {

struct TomlValue;
using TomlArray = std::vector<TomlValue>;
using TomlTable = std::map<std::string, TomlValue>;

struct TomlValue {
  std::variant<long long, double, bool, std::string, TomlArray, TomlTable> v;

  bool is_table() const { return std::holds_alternative<TomlTable>(v); }
  bool is_array() const { return std::holds_alternative<TomlArray>(v); }
};

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Cuts a trailing comment, honoring quoted strings.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

std::vector<std::string> split_key_path(const std::string& path, int line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      if (cur.empty()) fail(line, "empty key segment in '" + path + "'");
      parts.push_back(cur);
      cur.clear();
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
               c == '-') {
      cur += c;
    } else if (c == ' ' || c == '\t') {
      continue;
    } else {
      fail(line, std::string("invalid character '") + c + "' in key");
    }
  }
  if (cur.empty()) fail(line, "empty key in '" + path + "'");
  parts.push_back(cur);
  return parts;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : text_(text), line_(line) {}

  TomlValue parse() {
    TomlValue v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail(line_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
      ++pos_;
    }
  }

  TomlValue parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail(line_, "missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return TomlValue{true};
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return TomlValue{false};
    }
    return parse_number();
  }

  TomlValue parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\' && pos_ < text_.size()) {
        const char esc = text_[pos_++];
        switch (esc) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unknown escape \\") + esc);
        }
      }
      out += c;
    }
    if (pos_ >= text_.size()) fail(line_, "unterminated string");
    ++pos_;  // closing quote
    return TomlValue{out};
  }

  TomlValue parse_array() {
    ++pos_;  // '['
    TomlArray items;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return TomlValue{items};
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail(line_, "unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
          ++pos_;
          return TomlValue{items};
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return TomlValue{items};
      }
      fail(line_, "expected ',' or ']' in array");
    }
  }

  TomlValue parse_number() {
    const std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-') {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        ++pos_;
      } else {
        break;
      }
    }
    const std::string token = text_.substr(start, pos_ - start);
    if (token.empty()) fail(line_, "expected a value");
    if (is_float) {
      try {
        return TomlValue{std::stod(token)};
      } catch (const std::exception&) {
        fail(line_, "invalid number '" + token + "'");
      }
    }
    long long value = 0;
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail(line_, "invalid integer '" + token + "'");
    }
    return TomlValue{value};
  }

  const std::string& text_;
  int line_;
  std::size_t pos_ = 0;
};

TomlTable parse_toml(const std::string& text) {
  TomlTable root;
  TomlTable* current = &root;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_array = line.size() > 1 && line[1] == '[';
      const std::string closer = is_array ? "]]" : "]";
      if (line.substr(line.size() - closer.size()) != closer) {
        fail(line_no, "malformed table header");
      }
      const std::string path = line.substr(is_array ? 2 : 1,
                                           line.size() - 2 * (is_array ? 2 : 1));
      const std::vector<std::string> parts = split_key_path(path, line_no);
      TomlTable* table = &root;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const bool last = i + 1 == parts.size();
        auto [it, inserted] = table->try_emplace(
            parts[i], last && is_array ? TomlValue{TomlArray{}}
                                       : TomlValue{TomlTable{}});
        if (last && is_array) {
          if (!it->second.is_array()) {
            fail(line_no, "'" + parts[i] + "' is not a table array");
          }
          auto& arr = std::get<TomlArray>(it->second.v);
          arr.push_back(TomlValue{TomlTable{}});
          table = &std::get<TomlTable>(arr.back().v);
        } else if (it->second.is_array()) {
          // Descending through a table array targets its last element.
          auto& arr = std::get<TomlArray>(it->second.v);
          if (arr.empty() || !arr.back().is_table()) {
            fail(line_no, "'" + parts[i] + "' is not a table");
          }
          table = &std::get<TomlTable>(arr.back().v);
        } else if (it->second.is_table()) {
          table = &std::get<TomlTable>(it->second.v);
          if (last && !inserted && !is_array) {
            // Re-opening a plain table is fine only if it was created
            // implicitly by a dotted header; keep it simple and allow it.
          }
        } else {
          fail(line_no, "'" + parts[i] + "' is not a table");
        }
      }
      current = table;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(line_no, "expected 'key = value'");
    }
    const std::vector<std::string> keys =
        split_key_path(trim(line.substr(0, eq)), line_no);
    if (keys.size() != 1) fail(line_no, "dotted keys are not supported");
    const std::string value_text = trim(line.substr(eq + 1));
    ValueParser parser(value_text, line_no);
    auto [it, inserted] = current->try_emplace(keys[0], parser.parse());
    if (!inserted) fail(line_no, "duplicate key '" + keys[0] + "'");
  }
  return root;
}

// Typed view over a TomlTable that tracks which keys were consumed and
// rejects leftovers, so misspelled keys fail instead of silently holding
// defaults.
class TableReader {
 public:
  TableReader(const TomlTable& table, std::string context)
      : table_(table), context_(std::move(context)) {}

  ~TableReader() = default;

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  const TomlValue* find(const std::string& key) {
    seen_.insert(key);
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  long long get_int(const std::string& key, long long fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (auto* i = std::get_if<long long>(&v->v)) return *i;
    throw ConfigError(context_ + "." + key + ": expected an integer");
  }

  double get_double(const std::string& key, double fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (auto* d = std::get_if<double>(&v->v)) return *d;
    if (auto* i = std::get_if<long long>(&v->v)) return static_cast<double>(*i);
    throw ConfigError(context_ + "." + key + ": expected a number");
  }

  bool get_bool(const std::string& key, bool fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (auto* b = std::get_if<bool>(&v->v)) return *b;
    throw ConfigError(context_ + "." + key + ": expected a boolean");
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (auto* s = std::get_if<std::string>(&v->v)) return *s;
    throw ConfigError(context_ + "." + key + ": expected a string");
  }

  const TomlArray* get_array(const std::string& key) {
    const TomlValue* v = find(key);
    if (v == nullptr) return nullptr;
    if (auto* a = std::get_if<TomlArray>(&v->v)) return a;
    throw ConfigError(context_ + "." + key + ": expected an array");
  }

  const TomlTable* get_table(const std::string& key) {
    const TomlValue* v = find(key);
    if (v == nullptr) return nullptr;
    if (auto* t = std::get_if<TomlTable>(&v->v)) return t;
    throw ConfigError(context_ + "." + key + ": expected a table");
  }

  void finish() const {
    for (const auto& [key, value] : table_) {
      if (seen_.count(key) == 0) {
        throw ConfigError(context_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  const TomlTable& table_;
  std::string context_;
  std::set<std::string> seen_;
};

double number_at(const TomlArray& arr, std::size_t index,
                 const std::string& context) {
  if (index >= arr.size()) {
    throw ConfigError(context + ": expected " + std::to_string(index + 1) +
                      " entries");
  }
  if (auto* d = std::get_if<double>(&arr[index].v)) return *d;
  if (auto* i = std::get_if<long long>(&arr[index].v)) {
    return static_cast<double>(*i);
  }
  throw ConfigError(context + ": expected numbers");
}

std::pair<double, double> number_pair(const TomlValue& value,
                                      const std::string& context) {
  auto* arr = std::get_if<TomlArray>(&value.v);
  if (arr == nullptr || arr->size() != 2) {
    throw ConfigError(context + ": expected [lo, hi]");
  }
  return {number_at(*arr, 0, context), number_at(*arr, 1, context)};
}

DifficultyClass parse_class(const TomlTable& table, std::size_t index,
                            std::size_t num_ssms) {
  const std::string context = "workload.class[" + std::to_string(index) + "]";
  TableReader reader(table, context);
  DifficultyClass cls;
  cls.name = reader.get_string("name", "class" + std::to_string(index));
  cls.weight = reader.get_double("weight", 1.0);
  if (const TomlArray* prompt = reader.get_array("prompt_len")) {
    cls.prompt_len_lo = static_cast<int>(number_at(*prompt, 0, context));
    cls.prompt_len_hi = static_cast<int>(number_at(*prompt, 1, context));
  } else {
    throw ConfigError(context + ": prompt_len = [lo, hi] required");
  }
  if (const TomlArray* target = reader.get_array("target_len")) {
    cls.target_len_lo = static_cast<long long>(number_at(*target, 0, context));
    cls.target_len_hi = static_cast<long long>(number_at(*target, 1, context));
  } else {
    throw ConfigError(context + ": target_len = [lo, hi] required");
  }
  const TomlArray* accept = reader.get_array("accept");
  if (accept == nullptr) {
    throw ConfigError(context + ": accept = [[lo, hi], ...] required");
  }
  if (accept->size() != num_ssms) {
    throw ConfigError(context + ": accept needs one [lo, hi] per ssm");
  }
  for (std::size_t j = 0; j < accept->size(); ++j) {
    cls.accept_range.push_back(
        number_pair((*accept)[j], context + ".accept[" + std::to_string(j) + "]"));
  }
  reader.finish();
  return cls;
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "lbss") return PolicyKind::Lbss;
  if (name == "egreedy") return PolicyKind::EpsilonGreedy;
  if (name == "greedy") return PolicyKind::Greedy;
  if (name == "vanilla") return PolicyKind::Vanilla;
  throw ConfigError("experiment.policy: unknown policy '" + name + "'");
}

PipelineMode parse_mode(const std::string& name) {
  if (name == "serial") return PipelineMode::Serial;
  if (name == "pipelined") return PipelineMode::Pipelined;
  if (name == "tuned") return PipelineMode::Tuned;
  throw ConfigError("pipeline.mode: unknown mode '" + name + "'");
}

std::string format_double_toml(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string s(buf, ptr);
  // Keep floats recognizable as floats on re-parse.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const TomlTable root = parse_toml(text);
  TableReader top(root, "config");
  ExperimentConfig config;
  config.name = top.get_string("name", config.name);

  const TomlTable* workload = top.get_table("workload");
  if (workload == nullptr) {
    throw ConfigError("config: [workload] section required");
  }
  const TomlValue* ssm_value = top.find("ssm");
  if (ssm_value == nullptr || !ssm_value->is_array()) {
    throw ConfigError("config: at least one [[ssm]] section required");
  }
  const TomlArray& ssms = std::get<TomlArray>(ssm_value->v);
  for (std::size_t j = 0; j < ssms.size(); ++j) {
    if (!ssms[j].is_table()) throw ConfigError("config: [[ssm]] must be tables");
    TableReader reader(std::get<TomlTable>(ssms[j].v),
                       "ssm[" + std::to_string(j) + "]");
    SsmProfile profile;
    profile.id = static_cast<int>(j);
    profile.tokens_per_sec = reader.get_double("tokens_per_sec", 0.0);
    profile.batch_capacity =
        static_cast<int>(reader.get_int("batch_capacity", 1));
    profile.batch_slowdown = reader.get_double("batch_slowdown", 0.0);
    reader.finish();
    config.workload.ssm_profiles.push_back(profile);
  }

  {
    TableReader reader(*workload, "workload");
    config.workload.num_requests =
        static_cast<int>(reader.get_int("num_requests", 0));
    config.workload.window = static_cast<int>(reader.get_int("window", 1));
    config.workload.seed =
        static_cast<std::uint64_t>(reader.get_int("seed", 0));
    config.workload.bonus_token = reader.get_bool("bonus_token", true);
    const TomlValue* classes = reader.find("class");
    if (classes == nullptr || !classes->is_array()) {
      throw ConfigError("workload: at least one [[workload.class]] required");
    }
    const TomlArray& arr = std::get<TomlArray>(classes->v);
    for (std::size_t c = 0; c < arr.size(); ++c) {
      if (!arr[c].is_table()) {
        throw ConfigError("workload.class must be tables");
      }
      config.workload.difficulty_mix.push_back(
          parse_class(std::get<TomlTable>(arr[c].v), c,
                      config.workload.ssm_profiles.size()));
    }
    reader.finish();
  }

  if (const TomlTable* llm = top.get_table("llm")) {
    TableReader reader(*llm, "llm");
    config.workload.llm.fixed_overhead_sec =
        reader.get_double("fixed_overhead_sec", 0.0);
    config.workload.llm.per_token_sec = reader.get_double("per_token_sec", 0.0);
    reader.finish();
  } else {
    throw ConfigError("config: [llm] section required");
  }

  if (const TomlTable* bandit = top.get_table("bandit")) {
    TableReader reader(*bandit, "bandit");
    config.bandit.alpha = static_cast<int>(reader.get_int("alpha", 8));
    config.bandit.beta = static_cast<int>(reader.get_int("beta", 2));
    config.bandit.lambda = reader.get_double("lambda", 1.0);
    config.bandit.max_slots = reader.get_int("max_slots", 1);
    reader.finish();
  }

  if (const TomlTable* packer = top.get_table("packer")) {
    TableReader reader(*packer, "packer");
    config.packer.decomposition = reader.get_bool("decomposition", false);
    config.packer.width = static_cast<int>(reader.get_int("width", 0));
    reader.finish();
  }

  if (const TomlTable* pipeline = top.get_table("pipeline")) {
    TableReader reader(*pipeline, "pipeline");
    config.pipeline.mode = parse_mode(reader.get_string("mode", "serial"));
    config.pipeline.initial_micro_batches =
        static_cast<int>(reader.get_int("initial_micro_batches", 2));
    config.pipeline.degradation_threshold =
        reader.get_double("degradation_threshold", 0.05);
    config.pipeline.probe_slots = reader.get_int("probe_slots", 20);
    config.pipeline.max_micro_batches =
        static_cast<int>(reader.get_int("max_micro_batches", 8));
    config.pipeline.eval_slots = reader.get_int("eval_slots", 200);
    reader.finish();
  }

  if (const TomlTable* experiment = top.get_table("experiment")) {
    TableReader reader(*experiment, "experiment");
    config.policy = parse_policy(reader.get_string("policy", "lbss"));
    config.epsilon = reader.get_double("epsilon", 0.2);
    config.vanilla_ssm = static_cast<int>(reader.get_int("vanilla_ssm", 0));
    config.repetitions = static_cast<int>(reader.get_int("repetitions", 1));
    config.output_dir = reader.get_string("output_dir", "out");
    reader.finish();
  }

  top.finish();
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_toml(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "name = \"" << config.name << "\"\n\n";
  out << "[workload]\n";
  out << "num_requests = " << config.workload.num_requests << "\n";
  out << "window = " << config.workload.window << "\n";
  out << "seed = " << config.workload.seed << "\n";
  out << "bonus_token = " << (config.workload.bonus_token ? "true" : "false")
      << "\n";
  for (const DifficultyClass& cls : config.workload.difficulty_mix) {
    out << "\n[[workload.class]]\n";
    out << "name = \"" << cls.name << "\"\n";
    out << "weight = " << format_double_toml(cls.weight) << "\n";
    out << "prompt_len = [" << cls.prompt_len_lo << ", " << cls.prompt_len_hi
        << "]\n";
    out << "target_len = [" << cls.target_len_lo << ", " << cls.target_len_hi
        << "]\n";
    out << "accept = [";
    for (std::size_t j = 0; j < cls.accept_range.size(); ++j) {
      if (j > 0) out << ", ";
      out << "[" << format_double_toml(cls.accept_range[j].first) << ", "
          << format_double_toml(cls.accept_range[j].second) << "]";
    }
    out << "]\n";
  }
  for (const SsmProfile& ssm : config.workload.ssm_profiles) {
    out << "\n[[ssm]]\n";
    out << "tokens_per_sec = " << format_double_toml(ssm.tokens_per_sec)
        << "\n";
    out << "batch_capacity = " << ssm.batch_capacity << "\n";
    out << "batch_slowdown = " << format_double_toml(ssm.batch_slowdown)
        << "\n";
  }
  out << "\n[llm]\n";
  out << "fixed_overhead_sec = "
      << format_double_toml(config.workload.llm.fixed_overhead_sec) << "\n";
  out << "per_token_sec = "
      << format_double_toml(config.workload.llm.per_token_sec) << "\n";
  out << "\n[bandit]\n";
  out << "alpha = " << config.bandit.alpha << "\n";
  out << "beta = " << config.bandit.beta << "\n";
  out << "lambda = " << format_double_toml(config.bandit.lambda) << "\n";
  out << "max_slots = " << config.bandit.max_slots << "\n";
  out << "\n[packer]\n";
  out << "decomposition = " << (config.packer.decomposition ? "true" : "false")
      << "\n";
  out << "width = " << config.packer.width << "\n";
  out << "\n[pipeline]\n";
  out << "mode = \"" << to_string(config.pipeline.mode) << "\"\n";
  out << "initial_micro_batches = " << config.pipeline.initial_micro_batches
      << "\n";
  out << "degradation_threshold = "
      << format_double_toml(config.pipeline.degradation_threshold) << "\n";
  out << "probe_slots = " << config.pipeline.probe_slots << "\n";
  out << "max_micro_batches = " << config.pipeline.max_micro_batches << "\n";
  out << "eval_slots = " << config.pipeline.eval_slots << "\n";
  out << "\n[experiment]\n";
  out << "policy = \"" << to_string(config.policy) << "\"\n";
  out << "epsilon = " << format_double_toml(config.epsilon) << "\n";
  out << "vanilla_ssm = " << config.vanilla_ssm << "\n";
  out << "repetitions = " << config.repetitions << "\n";
  out << "output_dir = \"" << config.output_dir << "\"\n";
  return out.str();
}

}  // namespace specsim
