#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "finsage/engine.hpp"
#include "finsage/errors.hpp"

namespace httplib {
class Server;
}

namespace finsage {

// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitStore = 3,
  kExitClient = 4,
  kExitInput = 5,
  kExitInternal = 6,
};

int exit_code_for(ErrorCode code);

/// {"error": {"kind", "message", "exit_code"}} as written to stderr.
std::string error_json(const std::string& kind, const std::string& message, int exit_code);

/// Parses argv (without the program name) and runs one command, writing its
/// JSON result to `out` and any failure as error JSON to `err`. Returns the
/// process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Loads the store at config.store_path. Throws Error(kNotFound) when the
/// file does not exist.
std::shared_ptr<const ChunkStore> load_store(const EngineConfig& config);

/// HTTP front end: POST /retrieve {query, k} and GET /healthz.
std::unique_ptr<httplib::Server> make_query_server(std::shared_ptr<const Engine> engine);

nlohmann::ordered_json retrieve_response(const Engine& engine, const std::string& query, std::size_t k);

}  // namespace finsage
