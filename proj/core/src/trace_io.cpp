#include "specsim/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "specsim/errors.hpp"

namespace specsim {

namespace {

// Shortest round-trip decimal form; keeps emitted files byte-stable.
std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

const char* kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::SpecStart:
      return "spec_start";
    case EventKind::SpecEnd:
      return "spec_end";
    case EventKind::VerifyStart:
      return "verify_start";
    case EventKind::VerifyEnd:
      return "verify_end";
  }
  return "unknown";
}

EventKind kind_from_name(const std::string& name) {
  if (name == "spec_start") return EventKind::SpecStart;
  if (name == "spec_end") return EventKind::SpecEnd;
  if (name == "verify_start") return EventKind::VerifyStart;
  if (name == "verify_end") return EventKind::VerifyEnd;
  throw InputError("trace: unknown event kind '" + name + "'");
}

std::string resource_name(int resource) {
  return resource == kLlmResource ? "llm" : "ssm" + std::to_string(resource);
}

int resource_from_name(const std::string& name) {
  if (name == "llm") return kLlmResource;
  if (name.rfind("ssm", 0) == 0) return std::stoi(name.substr(3));
  throw InputError("trace: unknown resource '" + name + "'");
}

}  // namespace

std::string trace_csv(const EventTrace& trace) {
  std::ostringstream out;
  out << "time_sec,resource,kind,micro_batch,slot\n";
  for (const Event& e : trace.events) {
    out << format_double(e.time_sec) << ',' << resource_name(e.resource) << ','
        << kind_name(e.kind) << ',' << e.micro_batch << ',' << e.slot << '\n';
  }
  return out.str();
}

std::string trace_json(const EventTrace& trace) {
  nlohmann::ordered_json doc;
  doc["events"] = nlohmann::ordered_json::array();
  for (const Event& e : trace.events) {
    doc["events"].push_back({{"time_sec", e.time_sec},
                             {"resource", resource_name(e.resource)},
                             {"kind", kind_name(e.kind)},
                             {"micro_batch", e.micro_batch},
                             {"slot", e.slot}});
  }
  doc["totals"] = {{"llm_busy_sec", trace.llm_busy_sec},
                   {"llm_idle_sec", trace.llm_idle_sec},
                   {"accepted_tokens", trace.accepted_tokens}};
  return doc.dump(2) + "\n";
}

EventTrace parse_trace_json(const std::string& text) {
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    EventTrace trace;
    for (const auto& item : doc.at("events")) {
      Event e;
      e.time_sec = item.at("time_sec").get<double>();
      e.resource = resource_from_name(item.at("resource").get<std::string>());
      e.kind = kind_from_name(item.at("kind").get<std::string>());
      e.micro_batch = item.at("micro_batch").get<int>();
      e.slot = item.at("slot").get<long long>();
      trace.events.push_back(e);
    }
    const auto& totals = doc.at("totals");
    trace.llm_busy_sec = totals.at("llm_busy_sec").get<double>();
    trace.llm_idle_sec = totals.at("llm_idle_sec").get<double>();
    trace.accepted_tokens = totals.at("accepted_tokens").get<long long>();
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("trace: invalid json: ") + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    }
    out << content;
    if (!out.flush()) {
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    throw IoError("cannot move '" + tmp.string() + "' to '" + target.string() +
                  "': " + ec.message());
  }
}

void emit_trace(const EventTrace& trace, const std::string& path,
                TraceFormat format) {
  write_file_atomic(path,
                    format == TraceFormat::Csv ? trace_csv(trace)
                                               : trace_json(trace));
}

std::string history_csv(const std::vector<SlotRecord>& history) {
  std::ostringstream out;
  out << "slot,request,ssm,accepted,bonus,wall_time,switched,cost\n";
  for (const SlotRecord& rec : history) {
    out << rec.slot << ',' << rec.request_id << ',' << rec.ssm_id << ','
        << rec.accepted << ',' << rec.bonus << ','
        << format_double(rec.wall_time_sec) << ',' << (rec.switched ? 1 : 0)
        << ',' << format_double(rec.switch_cost_sec) << '\n';
  }
  return out.str();
}

void emit_history(const std::vector<SlotRecord>& history,
                  const std::string& path) {
  write_file_atomic(path, history_csv(history));
}

}  // namespace specsim
