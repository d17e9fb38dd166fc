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

// Scenario runner. Every command prints one JSON document on stdout; errors
// go out as {"code", "message"} with a nonzero exit.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "metakey/attacks.hpp"
#include "metakey/ledger_json.hpp"
#include "metakey/protocol.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace metakey;
using crypto::Digest;

constexpr NodeId kOwner{0};
constexpr std::size_t kDemoFileSize = 4096;

// ---- small file helpers ----------------------------------------------------

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bytes read_bytes(const fs::path& p) {
  const std::string s = read_text(p);
  return Bytes(s.begin(), s.end());
}

void write_bytes(const fs::path& p, ByteView data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
}

void write_text(const fs::path& p, const std::string& s) {
  write_bytes(p, as_bytes(s));
}

Digest parse_file_id(const std::string& hex) {
  try {
    return array_from_hex<32>(hex);
  } catch (const Error&) {
    throw Error(ErrorCode::invalid_argument, "file id must be 64 hex digits");
  }
}

// ---- config ------------------------------------------------------------------

struct Config {
  std::size_t n_nodes = 10;
  std::uint64_t seed = 0;
  std::string dpolicy = "last";
  std::size_t max_file_size = crypto::kDefaultMaxMessage;

  json to_json() const {
    return {{"n_nodes", n_nodes}, {"seed", seed}, {"dpolicy", dpolicy},
            {"max_file_size", max_file_size}};
  }

  static Config from_json(const json& j) {
    Config c;
    try {
      c.n_nodes = j.value("n_nodes", c.n_nodes);
      c.seed = j.value("seed", c.seed);
      c.dpolicy = j.value("dpolicy", c.dpolicy);
      c.max_file_size = j.value("max_file_size", c.max_file_size);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::configuration, std::string("bad config: ") + e.what());
    }
    c.validate();
    return c;
  }

  void validate() const {
    if (n_nodes < netsim::kMinNodes) {
      throw Error(ErrorCode::configuration, "n_nodes must be at least 4");
    }
    (void)policy();
  }

  crypto::DPolicy policy() const {
    try {
      return crypto::parse_dpolicy(dpolicy);
    } catch (const Error& e) {
      throw Error(ErrorCode::configuration, e.what());
    }
  }

  protocol::StoreOptions store_options() const { return {policy(), max_file_size}; }
};

// ---- workspace -----------------------------------------------------------------

/// Exclusive lock file; a second process on the same workspace gets an error.
class Lock {
 public:
  explicit Lock(fs::path p) : path_(std::move(p)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw Error(ErrorCode::locked, "workspace busy (remove " + path_.string() +
                                         " if no other run is active)");
    }
    std::fclose(f);
  }
  ~Lock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  Lock(const Lock&) = delete;
  Lock& operator=(const Lock&) = delete;

 private:
  fs::path path_;
};

/// On-disk layout:
///   config.json  state.json  keys.json  chain.jsonl
///   nodes/<id>/<blob id hex>.blob   grants/<file>-<receiver>.grant
class Workspace {
 public:
  Workspace(fs::path dir, bool create) : dir_(std::move(dir)) {
    if (create) fs::create_directories(dir_);
    if (!fs::is_directory(dir_)) {
      throw Error(ErrorCode::not_found, "no workspace at " + dir_.string());
    }
    lock_.emplace(dir_ / ".lock");
  }

  const fs::path& dir() const { return dir_; }
  bool initialized() const { return fs::exists(dir_ / "config.json"); }

  void init(const Config& cfg) {
    if (initialized()) {
      throw Error(ErrorCode::configuration, "workspace already initialized");
    }
    cfg_ = cfg;
    Drbg rng(cfg.seed);
    keys_[kOwner] = rng.bytes<32>();
    write_text(dir_ / "config.json", cfg.to_json().dump(2) + "\n");
    write_text(dir_ / "chain.jsonl", ledger::export_jsonl(ledger::genesis()));
    invocation_ = 0;
    clock_ = 0;
    save_keys();
    save_state();
  }

  /// Rebuilds the network for this invocation from persisted state.
  void load() {
    if (!initialized()) {
      throw Error(ErrorCode::not_found, "workspace not initialized; run init first");
    }
    cfg_ = Config::from_json(json::parse(read_text(dir_ / "config.json")));
    const json state = json::parse(read_text(dir_ / "state.json"));
    invocation_ = state.at("invocation").get<std::uint64_t>() + 1;
    clock_ = state.at("clock").get<std::uint64_t>();
    const json keys = json::parse(read_text(dir_ / "keys.json"));
    for (const auto& [id, hex] : keys.items()) {
      keys_[NodeId{std::stoull(id)}] = array_from_hex<32>(hex.get<std::string>());
    }
    chain_ = ledger::import_jsonl(read_text(dir_ / "chain.jsonl"));

    // a different generator stream per invocation, reproducible from the seed
    net_.emplace(cfg_.n_nodes, cfg_.seed ^ (invocation_ * 0x9e3779b97f4a7c15ULL));
    net_->set_clock(clock_);
    for (const auto& [id, seed] : keys_) net_->mark_agent(id);
    if (fs::exists(dir_ / "nodes")) {
      for (const auto& node_dir : fs::directory_iterator(dir_ / "nodes")) {
        const NodeId id{std::stoull(node_dir.path().filename().string())};
        for (const auto& f : fs::directory_iterator(node_dir)) {
          net_->node(id).blobs[array_from_hex<32>(f.path().stem().string())] =
              read_bytes(f.path());
        }
      }
    }
  }

  void save() {
    for (std::size_t i = 0; i < net_->size(); ++i) {
      for (const auto& [id, blob] : net_->node(NodeId{i}).blobs) {
        const fs::path p = dir_ / "nodes" / std::to_string(i) / (to_hex(id) + ".blob");
        if (!fs::exists(p)) write_bytes(p, blob);
      }
    }
    write_text(dir_ / "chain.jsonl", ledger::export_jsonl(chain_));
    clock_ = net_->clock();
    save_keys();
    save_state();
  }

  const Config& config() const { return cfg_; }
  netsim::Network& net() { return *net_; }
  ledger::Chain& chain() { return chain_; }

  protocol::UserAgent agent(NodeId id) {
    auto it = keys_.find(id);
    if (it == keys_.end()) {
      throw Error(ErrorCode::not_found, "no agent at node " + to_string(id));
    }
    return {id, crypto::envelope_keygen(it->second)};
  }

  /// Turns a plain node into a user endpoint on first use.
  protocol::UserAgent ensure_agent(NodeId id) {
    if (!net_->contains(id)) throw Error(ErrorCode::routing, "unknown node " + to_string(id));
    if (!keys_.contains(id)) {
      keys_[id] = net_->rng().bytes<32>();
      net_->mark_agent(id);
    }
    return agent(id);
  }

  std::vector<NodeId> agent_ids() const {
    std::vector<NodeId> out;
    for (const auto& [id, seed] : keys_) out.push_back(id);
    return out;
  }

 private:
  void save_keys() const {
    json j = json::object();
    for (const auto& [id, seed] : keys_) j[std::to_string(id.value)] = to_hex(seed);
    write_text(dir_ / "keys.json", j.dump(2) + "\n");
  }
  void save_state() const {
    write_text(dir_ / "state.json",
               json{{"invocation", invocation_}, {"clock", clock_}}.dump(2) + "\n");
  }

  fs::path dir_;
  std::optional<Lock> lock_;
  Config cfg_;
  std::uint64_t invocation_ = 0;
  std::uint64_t clock_ = 0;
  std::map<NodeId, ByteArray<32>> keys_;
  ledger::Chain chain_;
  std::optional<netsim::Network> net_;
};

// ---- in-memory scenario -------------------------------------------------------

struct Scenario {
  explicit Scenario(const Config& cfg)
      : net(cfg.n_nodes, cfg.seed),
        owner(protocol::make_agent(kOwner, net)),
        receiver(protocol::make_agent(NodeId{1}, net)) {}

  netsim::Network net;
  ledger::Chain chain = ledger::genesis();
  protocol::UserAgent owner;
  protocol::UserAgent receiver;
};

json trace_json(const netsim::Trace& trace) {
  json out = json::array();
  for (const auto& d : trace.deliveries()) out.push_back(netsim::delivery_to_json(d));
  return out;
}

// ---- commands -------------------------------------------------------------------

struct Options {
  std::string workspace;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string trace_path;
};

Config base_config(const Options& o) {
  Config cfg;
  if (!o.config_path.empty()) cfg = Config::from_json(json::parse(read_text(o.config_path)));
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void dump_trace(const Options& o, const netsim::Trace& trace) {
  if (!o.trace_path.empty()) write_text(o.trace_path, netsim::export_trace_jsonl(trace));
}

fs::path workspace_dir(const Options& o) {
  if (!o.workspace.empty()) return o.workspace;
  if (const char* env = std::getenv("METAKEY_WORKSPACE"); env != nullptr && *env) return env;
  return "metakey-workspace";
}

json cmd_init(const Options& o) {
  Config cfg = base_config(o);
  if (!o.seed && o.config_path.empty()) cfg.seed = system_seed();
  cfg.validate();
  Workspace ws(workspace_dir(o), true);
  ws.init(cfg);
  return {{"workspace", ws.dir().string()}, {"config", cfg.to_json()}};
}

/// Runs body against a loaded workspace and persists the result.
template <class F>
json with_workspace(const Options& o, F&& body) {
  Workspace ws(workspace_dir(o), false);
  ws.load();
  json out = body(ws);
  ws.save();
  dump_trace(o, ws.net().trace());
  return out;
}

json cmd_store(const Options& o, const std::string& path) {
  return with_workspace(o, [&](Workspace& ws) {
    const Bytes data = read_bytes(path);
    const Digest id = protocol::store_file(ws.agent(kOwner), data, ws.net(), ws.chain(),
                                           ws.config().store_options());
    return json{{"file_id", to_hex(id)}, {"size", data.size()}};
  });
}

json cmd_get(const Options& o, const std::string& file_id, const std::string& out) {
  return with_workspace(o, [&](Workspace& ws) {
    const Bytes data = protocol::retrieve_file(ws.agent(kOwner), parse_file_id(file_id),
                                               ws.net(), ws.chain());
    write_bytes(out, data);
    return json{{"file_id", file_id}, {"size", data.size()}, {"out", out}};
  });
}

json cmd_share(const Options& o, const std::string& file_id, std::uint64_t to,
               std::string out) {
  return with_workspace(o, [&](Workspace& ws) {
    if (NodeId{to} == kOwner) {
      throw Error(ErrorCode::invalid_argument, "owner cannot share with itself");
    }
    const auto receiver = ws.ensure_agent(NodeId{to});
    const Digest id = parse_file_id(file_id);
    protocol::share_file(ws.agent(kOwner), id, protocol::principal_of(receiver), ws.net(),
                         ws.chain());
    const auto sealed = protocol::take_grants(receiver, ws.net());
    if (sealed.empty()) throw Error(ErrorCode::routing, "grant was not delivered");
    if (out.empty()) {
      out = (ws.dir() / "grants" /
             (file_id.substr(0, 16) + "-" + std::to_string(to) + ".grant"))
                .string();
    }
    write_bytes(out, sealed.back());
    return json{{"file_id", file_id}, {"receiver", to}, {"grant", out}};
  });
}

json cmd_accept(const Options& o, const std::string& grant_path, const std::string& out,
                std::optional<std::uint64_t> as) {
  return with_workspace(o, [&](Workspace& ws) {
    const Bytes sealed = read_bytes(grant_path);
    std::optional<protocol::UserAgent> who;
    if (as) {
      who = ws.agent(NodeId{*as});
    } else {
      for (NodeId id : ws.agent_ids()) {
        if (id == kOwner) continue;
        try {
          protocol::open_grant(ws.agent(id), sealed);
          who = ws.agent(id);
          break;
        } catch (const Error&) {
        }
      }
      if (!who) throw Error(ErrorCode::authorization, "no local agent can open this grant");
    }
    const auto grant = protocol::open_grant(*who, sealed);
    const Bytes data = protocol::accept_share(*who, sealed, ws.net());
    write_bytes(out, data);
    return json{{"file_id", to_hex(grant.file_id)},
                {"receiver", who->id.value},
                {"size", data.size()},
                {"out", out}};
  });
}

/// Exit status travels separately so a failed audit still prints its report.
json cmd_audit(const Options& o, int& status) {
  Workspace ws(workspace_dir(o), false);
  if (!ws.initialized()) throw Error(ErrorCode::not_found, "workspace not initialized");
  std::istringstream in(read_text(ws.dir() / "chain.jsonl"));
  ledger::Chain chain;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      chain.blocks.push_back(ledger::block_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      status = 1;
      return {{"code", "verification"},
              {"message", std::string("unreadable block: ") + e.what()},
              {"ok", false},
              {"failing_height", chain.size()}};
    }
  }
  if (auto failure = ledger::verify(chain)) {
    status = 1;
    return {{"code", "verification"},
            {"message", failure->reason},
            {"ok", false},
            {"failing_height", failure->height}};
  }
  std::size_t records = 0;
  for (const auto& b : chain.blocks) records += b.records.size();
  return {{"ok", true}, {"blocks", chain.size()}, {"records", records},
          {"tip", to_hex(chain.tip().block_hash)}};
}

json run_demo(const Config& cfg, const Options& o, bool with_trace) {
  Scenario w(cfg);
  auto raw = w.net.rng().bytes<kDemoFileSize>();
  const Bytes plaintext(raw.begin(), raw.end());
  const Digest id = protocol::store_file(w.owner, plaintext, w.net, w.chain,
                                         cfg.store_options());
  const bool retrieved = protocol::retrieve_file(w.owner, id, w.net, w.chain) == plaintext;
  const std::size_t share_start = w.net.trace().size();
  const auto grant = protocol::share_file(w.owner, id, protocol::principal_of(w.receiver),
                                          w.net, w.chain);
  json share_kinds = json::array();
  for (std::size_t i = share_start; i < w.net.trace().size(); ++i) {
    share_kinds.push_back(to_string(w.net.trace().deliveries()[i].message.kind()));
  }
  bool accepted = false;
  for (const auto& sealed : protocol::take_grants(w.receiver, w.net)) {
    accepted = protocol::accept_share(w.receiver, sealed, w.net) == plaintext;
  }
  const auto run = attacks::describe_share(w.owner, grant, w.receiver.id, w.chain);
  dump_trace(o, w.net.trace());
  json out{{"seed", cfg.seed},
           {"n_nodes", cfg.n_nodes},
           {"dpolicy", cfg.dpolicy},
           {"file_id", to_hex(id)},
           {"retrieved_ok", retrieved},
           {"accepted_ok", accepted},
           {"share_phase", share_kinds},
           {"chain_ok", !ledger::verify(w.chain).has_value()},
           {"chain_blocks", w.chain.size()},
           {"matrix", attacks::matrix_to_json(w.net.trace(), run)}};
  if (with_trace) out["trace"] = trace_json(w.net.trace());
  return out;
}

Config scenario_config(const Options& o) {
  Config cfg = base_config(o);
  if (!o.seed && o.config_path.empty()) cfg.seed = system_seed();
  cfg.validate();
  return cfg;
}

json cmd_demo(const Options& o) { return run_demo(scenario_config(o), o, true); }

json cmd_attack_matrix(const Options& o) {
  const json demo = run_demo(scenario_config(o), o, false);
  return {{"seed", demo["seed"]}, {"matrix", demo["matrix"]}};
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

int fail(std::string_view code, const std::string& message, int status = 1) {
  emit({{"code", code}, {"message", message}});
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metakey: decentralized storage with proxy re-encrypted sharing"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--workspace", o.workspace, "workspace directory (or METAKEY_WORKSPACE)");
  auto* seed_opt = app.add_option("--seed", seed, "64-bit seed");
  app.add_option("--config", o.config_path, "config JSON");
  app.add_option("--json-trace", o.trace_path, "write the delivery trace as JSONL");

  auto* init = app.add_subcommand("init", "create a workspace with config and genesis");

  std::string path, out, file_id;
  auto* store = app.add_subcommand("store", "encrypt and store a file");
  store->add_option("path", path)->required();

  auto* get = app.add_subcommand("get", "retrieve a stored file");
  get->add_option("file_id", file_id)->required();
  get->add_option("out", out)->required();

  std::uint64_t to = 0;
  auto* share = app.add_subcommand("share", "share a file with another agent");
  share->add_option("file_id", file_id)->required();
  share->add_option("--to", to, "receiver node id")->required();
  share->add_option("--out", out, "grant file path");

  std::string grant_path;
  std::uint64_t as = 0;
  auto* accept = app.add_subcommand("accept", "open a grant and fetch the shared file");
  accept->add_option("grant", grant_path)->required();
  accept->add_option("out", out)->required();
  auto* as_opt = accept->add_option("--as", as, "receiver node id");

  auto* audit = app.add_subcommand("audit", "verify the ledger");
  auto* attack = app.add_subcommand("attack", "security analysis");
  attack->require_subcommand(1);
  attack->fallthrough();
  auto* matrix = attack->add_subcommand("matrix", "collusion matrix for a seeded run");
  auto* demo = app.add_subcommand("demo", "scripted store/share/accept run with trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, std::cerr, std::cerr);
  } catch (const CLI::ParseError& e) {
    return fail("invalid_argument", e.what(), 2);
  }
  if (*seed_opt) o.seed = seed;

  try {
    int status = 0;
    json result;
    if (*init) {
      result = cmd_init(o);
    } else if (*store) {
      result = cmd_store(o, path);
    } else if (*get) {
      result = cmd_get(o, file_id, out);
    } else if (*share) {
      result = cmd_share(o, file_id, to, out);
    } else if (*accept) {
      result = cmd_accept(o, grant_path, out,
                          *as_opt ? std::optional<std::uint64_t>(as) : std::nullopt);
    } else if (*audit) {
      result = cmd_audit(o, status);
    } else if (*matrix) {
      result = cmd_attack_matrix(o);
    } else if (*demo) {
      result = cmd_demo(o);
    }
    emit(result);
    return status;
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail("format", e.what());
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
}
