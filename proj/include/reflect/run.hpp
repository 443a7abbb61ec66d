#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "reflect/config.hpp"

namespace reflect::run {

// Exclusive ownership of a run directory for the lifetime of the object (`.lock` file).
class RunLock {
  public:
    // Throws Error if another process holds the lock.
    explicit RunLock(std::filesystem::path dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

  private:
    std::filesystem::path path_;
};

// `run.json`: identity and provenance of a run. Steps and artifacts are only ever added.
class RunRecord {
  public:
    // Creates a fresh record for a new run directory.
    static RunRecord create(const std::filesystem::path& dir, const std::string& run_id, const config::RunConfig& cfg);
    // Loads an existing run. Throws ValidationError if missing or written under a different config.
    static RunRecord open(const std::filesystem::path& dir, const config::RunConfig& cfg);

    const std::string& run_id() const { return run_id_; }
    const std::filesystem::path& dir() const { return dir_; }

    void set(const std::string& key, nlohmann::json value);
    const nlohmann::json& get(const std::string& key) const;
    bool has(const std::string& key) const;

    // Registers an artifact path (relative to the run directory).
    void add_artifact(const std::string& name, const std::filesystem::path& path);
    void add_step(const std::string& command, int exit_code, const std::string& note = {});
    void save() const;

    const nlohmann::json& data() const { return data_; }

  private:
    std::filesystem::path dir_;
    std::string run_id_;
    nlohmann::json data_;
};

// `YYYYMMDDTHHMMSSZ` in UTC.
std::string utc_timestamp();
std::string new_run_id();

}  // namespace reflect::run
