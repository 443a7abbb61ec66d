#include "reflect/run.hpp"

#include <chrono>
#include <ctime>
#include <random>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/prompts.hpp"

namespace reflect::run {

namespace fs = std::filesystem;
using nlohmann::json;

RunLock::RunLock(fs::path dir) : path_(std::move(dir) / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw Error("run directory is locked by another command (" + path_.string() + ")");
    const auto pid = std::to_string(::getpid());
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::string new_run_id() {
    std::random_device rd;
    return fmt::format("{}-{:04x}", utc_timestamp(), rd() & 0xFFFF);
}

RunRecord RunRecord::create(const fs::path& dir, const std::string& run_id, const config::RunConfig& cfg) {
    RunRecord r;
    r.dir_ = dir;
    r.run_id_ = run_id;
    json digests = json::object();
    for (auto k : prompts::kAllPromptKinds) digests[std::string(prompts::to_string(k))] = prompts::prompt_digest(k);
    r.data_ = {
        {"run_id", run_id},
        {"created", utc_timestamp()},
        {"config_path", cfg.source.string()},
        {"config_hash", config::config_hash(cfg)},
        {"prompt_digests", digests},
        {"judge_layout", std::string(prompts::kJudgeLayout)},
        {"seeds", {{"split", cfg.split_seed}, {"review", cfg.review.seed}}},
        {"artifacts", json::object()},
        {"steps", json::array()},
    };
    return r;
}

RunRecord RunRecord::open(const fs::path& dir, const config::RunConfig& cfg) {
    const auto path = dir / "run.json";
    if (!fs::is_regular_file(path)) throw ValidationError("no run at " + dir.string() + " (run `ingest` first)");
    RunRecord r;
    r.dir_ = dir;
    try {
        r.data_ = json::parse(io::read_file(path));
        r.run_id_ = r.data_.at("run_id").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError("corrupt run record " + path.string() + ": " + e.what());
    }
    const auto hash = config::config_hash(cfg);
    if (r.data_.value("config_hash", std::string{}) != hash) {
        throw ValidationError("run " + r.run_id_ + " was created with a different config file");
    }
    return r;
}

void RunRecord::set(const std::string& key, json value) { data_[key] = std::move(value); }

const json& RunRecord::get(const std::string& key) const {
    if (!data_.contains(key)) throw ValidationError("run record has no '" + key + "'");
    return data_.at(key);
}

bool RunRecord::has(const std::string& key) const { return data_.contains(key); }

void RunRecord::add_artifact(const std::string& name, const fs::path& path) {
    data_["artifacts"][name] = fs::relative(path, dir_).generic_string();
}

void RunRecord::add_step(const std::string& command, int exit_code, const std::string& note) {
    json step{{"command", command}, {"finished", utc_timestamp()}, {"exit", exit_code}};
    if (!note.empty()) step["note"] = note;
    data_["steps"].push_back(std::move(step));
}

void RunRecord::save() const { io::write_file_atomic(dir_ / "run.json", data_.dump(2) + "\n"); }

}  // namespace reflect::run
