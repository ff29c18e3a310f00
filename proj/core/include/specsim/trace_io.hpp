#pragma once

#include <string>

#include "specsim/pipeline.hpp"
#include "specsim/slot_engine.hpp"

namespace specsim {

enum class TraceFormat { Csv, Json };

// Stable schemas, pinned by golden tests:
//   CSV header: time_sec,resource,kind,micro_batch,slot
//   JSON: {"events": [...], "totals": {...}}
std::string trace_csv(const EventTrace& trace);
std::string trace_json(const EventTrace& trace);
EventTrace parse_trace_json(const std::string& text);

// Writes via a temp file plus rename so readers never see partial output.
void emit_trace(const EventTrace& trace, const std::string& path,
                TraceFormat format);

// Per-slot history export.
//   CSV header: slot,request,ssm,accepted,bonus,wall_time,switched,cost
std::string history_csv(const std::vector<SlotRecord>& history);
void emit_history(const std::vector<SlotRecord>& history,
                  const std::string& path);

// Shared atomic text writer.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace specsim
