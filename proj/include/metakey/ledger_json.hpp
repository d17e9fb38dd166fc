// Copyright 2026 The Metakey Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <string>

#include "json.hpp"
#include "metakey/ledger.hpp"

namespace metakey::ledger {

// Line-delimited JSON: one block per line, byte fields as lowercase hex.
// block_hash is carried as stored; verify() recomputes it from the binary
// canonical form, never from the JSON text.

inline nlohmann::json record_to_json(const Record& record) {
  if (const auto* m = std::get_if<MetadataRecord>(&record)) {
    return {{"kind", "metadata"},
            {"file_id", to_hex(m->file_id)},
            {"owner_id", m->owner_id.value},
            {"content_hash", to_hex(m->content_hash)},
            {"wrapped_key", to_hex(m->wrapped_key)},
            {"created_at", m->created_at}};
  }
  const auto& s = std::get<ShareRecord>(record);
  return {{"kind", "share"},
          {"file_id", to_hex(s.file_id)},
          {"owner_id", s.owner_id.value},
          {"grant_hash", to_hex(s.grant_hash)},
          {"created_at", s.created_at}};
}

inline Record record_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "metadata") {
    MetadataRecord m;
    m.file_id = array_from_hex<32>(j.at("file_id").get<std::string>());
    m.owner_id = NodeId{j.at("owner_id").get<std::uint64_t>()};
    m.content_hash = array_from_hex<32>(j.at("content_hash").get<std::string>());
    m.wrapped_key = from_hex(j.at("wrapped_key").get<std::string>());
    m.created_at = j.at("created_at").get<std::uint64_t>();
    return m;
  }
  if (kind == "share") {
    ShareRecord s;
    s.file_id = array_from_hex<32>(j.at("file_id").get<std::string>());
    s.owner_id = NodeId{j.at("owner_id").get<std::uint64_t>()};
    s.grant_hash = array_from_hex<32>(j.at("grant_hash").get<std::string>());
    s.created_at = j.at("created_at").get<std::uint64_t>();
    return s;
  }
  throw Error(ErrorCode::format, "unknown record kind '" + kind + "'");
}

inline nlohmann::json block_to_json(const LedgerBlock& b) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : b.records) records.push_back(record_to_json(r));
  return {{"height", b.height},
          {"prev_hash", to_hex(b.prev_hash)},
          {"timestamp", b.timestamp},
          {"records", std::move(records)},
          {"block_hash", to_hex(b.block_hash)}};
}

inline LedgerBlock block_from_json(const nlohmann::json& j) {
  LedgerBlock b;
  b.height = j.at("height").get<std::uint64_t>();
  b.prev_hash = array_from_hex<32>(j.at("prev_hash").get<std::string>());
  b.timestamp = j.at("timestamp").get<std::uint64_t>();
  for (const auto& r : j.at("records")) b.records.push_back(record_from_json(r));
  b.block_hash = array_from_hex<32>(j.at("block_hash").get<std::string>());
  return b;
}

inline std::string export_jsonl(const Chain& chain) {
  std::string out;
  for (const auto& b : chain.blocks) {
    out += block_to_json(b).dump();
    out += '\n';
  }
  return out;
}

/// Parses without verifying. Malformed lines raise ErrorCode::format.
inline Chain import_jsonl(const std::string& text) {
  Chain chain;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      chain.blocks.push_back(block_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format,
                  "chain line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::format,
                  "chain line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chain;
}

}  // namespace metakey::ledger
