#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repex/errors.hpp"
#include "repex/model.hpp"
#include "repex/patterns.hpp"

namespace repex {

namespace io {

using nlohmann::json;

// shortest round-trip representation, stable across runs
inline std::string num(double x) { return json(x).dump(); }

inline std::ofstream open_out(const std::filesystem::path& path, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
    return in;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Exchange records: one JSON line per exchange phase
// {"cycle":c,"dim":d,"pairs":[{"i":..,"j":..,"delta":..,"u":..,"accepted":..}]}
// ---------------------------------------------------------------------------

inline void write_exchange_jsonl(const std::filesystem::path& path,
                                 const std::vector<ExchangeRecord>& records, bool append) {
    auto out = io::open_out(path, append);
    for (const auto& record : records) {
        io::json pairs = io::json::array();
        for (const auto& pair : record.pairs)
            pairs.push_back({{"i", pair.replica_i},
                             {"j", pair.replica_j},
                             {"delta", pair.delta},
                             {"u", pair.u},
                             {"accepted", pair.accepted}});
        io::json line = {{"cycle", record.cycle}, {"dim", record.dim}, {"pairs", pairs}};
        out << line.dump() << '\n';
    }
}

inline std::vector<ExchangeRecord> read_exchange_jsonl(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<ExchangeRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        io::json node = io::json::parse(line);
        ExchangeRecord record;
        record.cycle = node.at("cycle").get<long>();
        record.dim = node.at("dim").get<int>();
        for (const auto& pair : node.at("pairs"))
            record.pairs.push_back({pair.at("i").get<int>(), pair.at("j").get<int>(),
                                    pair.at("delta").get<double>(), pair.at("u").get<double>(),
                                    pair.at("accepted").get<bool>()});
        records.push_back(std::move(record));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Event trace: one JSON line per event {"t":..,"event":..,"task":..,
// "replica":..,"cores":..}; times are virtual and deterministic
// ---------------------------------------------------------------------------

inline void write_events_jsonl(const std::filesystem::path& path, const std::vector<Event>& events,
                               bool append, std::size_t from = 0) {
    auto out = io::open_out(path, append);
    for (std::size_t k = from; k < events.size(); ++k) {
        const Event& e = events[k];
        io::json line = {{"t", e.t},
                         {"event", to_string(e.kind)},
                         {"task", e.task},
                         {"replica", e.replica},
                         {"cores", e.cores}};
        out << line.dump() << '\n';
    }
}

inline std::vector<Event> read_events_jsonl(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<Event> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        io::json node = io::json::parse(line);
        Event event;
        event.t = node.at("t").get<double>();
        const std::string kind = node.at("event").get<std::string>();
        if (kind == "submit") event.kind = EventKind::Submit;
        else if (kind == "start") event.kind = EventKind::Start;
        else if (kind == "end") event.kind = EventKind::End;
        else if (kind == "fail") event.kind = EventKind::Fail;
        else if (kind == "barrier") event.kind = EventKind::Barrier;
        else if (kind == "exchange") event.kind = EventKind::Exchange;
        else throw Error(ErrorCode::InvalidValue, "unknown event kind " + kind);
        event.task = node.at("task").get<std::int64_t>();
        event.replica = node.at("replica").get<int>();
        event.cores = node.at("cores").get<int>();
        events.push_back(event);
    }
    return events;
}

// ---------------------------------------------------------------------------
// Timing CSV: cycle,dim,t_md,t_ex,t_data,t_framework_over,t_launch_over,t_c
// ---------------------------------------------------------------------------

inline constexpr const char* kTimingHeader =
    "cycle,dim,t_md,t_ex,t_data,t_framework_over,t_launch_over,t_c";

inline void write_timing_csv(const std::filesystem::path& path, const std::vector<TimingRow>& rows,
                             bool append) {
    auto out = io::open_out(path, append);
    if (!append) out << kTimingHeader << '\n';
    for (const auto& row : rows) {
        out << row.cycle << ',' << row.dim << ',' << io::num(row.timing.t_md) << ','
            << io::num(row.timing.t_ex) << ',' << io::num(row.timing.t_data) << ','
            << io::num(row.timing.t_framework_over) << ',' << io::num(row.timing.t_launch_over)
            << ',' << io::num(cycle_time(row.timing)) << '\n';
    }
}

inline std::vector<TimingRow> read_timing_csv(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<TimingRow> rows;
    std::string line;
    if (!std::getline(in, line) || line != kTimingHeader)
        throw Error(ErrorCode::InvalidValue, path.string() + ": unexpected timing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = io::split_csv(line);
        if (fields.size() != 8)
            throw Error(ErrorCode::InvalidValue, path.string() + ": malformed timing row");
        TimingRow row;
        row.cycle = std::stol(fields[0]);
        row.dim = std::stoi(fields[1]);
        row.timing = {std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4]),
                      std::stod(fields[5]), std::stod(fields[6])};
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Task table CSV (per completed task attempt)
// ---------------------------------------------------------------------------

inline constexpr const char* kTaskHeader =
    "task,kind,replica,cycle,attempt,cores,submit_t,start_t,end_t,overhead,duration,failed";

inline void write_tasks_csv(const std::filesystem::path& path, const std::vector<TaskRow>& rows,
                            bool append, std::size_t from = 0) {
    auto out = io::open_out(path, append);
    if (!append) out << kTaskHeader << '\n';
    for (std::size_t k = from; k < rows.size(); ++k) {
        const TaskRow& row = rows[k];
        out << row.id << ',' << to_string(row.kind) << ',' << row.replica << ',' << row.cycle << ','
            << row.attempt << ',' << row.cores << ',' << io::num(row.submit_t) << ','
            << io::num(row.start_t) << ',' << io::num(row.end_t) << ',' << io::num(row.overhead)
            << ',' << io::num(row.duration) << ',' << (row.failed ? 1 : 0) << '\n';
    }
}

inline std::vector<TaskRow> read_tasks_csv(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    std::vector<TaskRow> rows;
    std::string line;
    if (!std::getline(in, line) || line != kTaskHeader)
        throw Error(ErrorCode::InvalidValue, path.string() + ": unexpected task header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = io::split_csv(line);
        if (fields.size() != 12)
            throw Error(ErrorCode::InvalidValue, path.string() + ": malformed task row");
        TaskRow row;
        row.id = std::stoll(fields[0]);
        row.kind = fields[1] == "md_segment"    ? TaskKind::MdSegment
                   : fields[1] == "energy_eval" ? TaskKind::EnergyEval
                                                : TaskKind::ExchangeCompute;
        row.replica = std::stoi(fields[2]);
        row.cycle = std::stol(fields[3]);
        row.attempt = std::stoi(fields[4]);
        row.cores = std::stoi(fields[5]);
        row.submit_t = std::stod(fields[6]);
        row.start_t = std::stod(fields[7]);
        row.end_t = std::stod(fields[8]);
        row.overhead = std::stod(fields[9]);
        row.duration = std::stod(fields[10]);
        row.failed = fields[11] == "1";
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Wall-clock CSV (RealWorkers only; the one non-deterministic artifact)
// ---------------------------------------------------------------------------

inline void write_wall_csv(const std::filesystem::path& path, const std::vector<WallRow>& rows,
                           bool append, std::size_t from = 0) {
    auto out = io::open_out(path, append);
    if (!append) out << "cycle,wall_md_seconds,wall_ex_seconds\n";
    for (std::size_t k = from; k < rows.size(); ++k)
        out << rows[k].cycle << ',' << io::num(rows[k].wall_md_seconds) << ','
            << io::num(rows[k].wall_ex_seconds) << '\n';
}

// ---------------------------------------------------------------------------
// Trajectory CSV: replica,cycle,slot0..slotD-1,c0[,c1]
// ---------------------------------------------------------------------------

inline std::string trajectory_header(std::size_t dims, std::size_t dof) {
    std::string header = "replica,cycle";
    for (std::size_t d = 0; d < dims; ++d) header += ",slot" + std::to_string(d);
    for (std::size_t c = 0; c < dof; ++c) header += ",c" + std::to_string(c);
    return header;
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<TrajectorySample>& samples, std::size_t dims,
                                 std::size_t dof, bool append, std::size_t from = 0) {
    auto out = io::open_out(path, append);
    if (!append) out << trajectory_header(dims, dof) << '\n';
    for (std::size_t k = from; k < samples.size(); ++k) {
        const TrajectorySample& sample = samples[k];
        out << sample.replica << ',' << sample.cycle;
        for (int slot : sample.coords) out << ',' << slot;
        for (double q : sample.frame) out << ',' << io::num(q);
        out << '\n';
    }
}

inline std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path,
                                                         std::size_t dims, std::size_t dof) {
    auto in = io::open_in(path);
    std::vector<TrajectorySample> samples;
    std::string line;
    if (!std::getline(in, line) || line != trajectory_header(dims, dof))
        throw Error(ErrorCode::InvalidValue, path.string() + ": unexpected trajectory header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = io::split_csv(line);
        if (fields.size() != 2 + dims + dof)
            throw Error(ErrorCode::InvalidValue, path.string() + ": malformed trajectory row");
        TrajectorySample sample;
        sample.replica = std::stoi(fields[0]);
        sample.cycle = std::stol(fields[1]);
        for (std::size_t d = 0; d < dims; ++d) sample.coords.push_back(std::stoi(fields[2 + d]));
        for (std::size_t c = 0; c < dof; ++c) sample.frame.push_back(std::stod(fields[2 + dims + c]));
        samples.push_back(std::move(sample));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Summary CSV: key,value
// ---------------------------------------------------------------------------

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& entries) {
    auto out = io::open_out(path, false);
    out << "key,value\n";
    for (const auto& [key, value] : entries) out << key << ',' << value << '\n';
}

// ---------------------------------------------------------------------------
// Restart file (versioned)
// ---------------------------------------------------------------------------

inline constexpr const char* kRestartFormat = "repex-restart-1";

struct RestartState {
    long next_cycle = 0;
    double virtual_now = 0.0;
    std::int64_t next_task_id = 0;
    std::uint64_t config_digest = 0;
    std::vector<ReplicaState> replicas;
};

inline void write_restart(const std::filesystem::path& path, const RestartState& state) {
    io::json replicas = io::json::array();
    for (const ReplicaState& replica : state.replicas) {
        replicas.push_back({{"id", replica.id},
                            {"coords", replica.coords},
                            {"configuration", replica.configuration},
                            {"velocities", replica.velocities},
                            {"cycle_count", replica.cycle_count},
                            {"status", to_string(replica.status)},
                            {"rng_seed", replica.rng_seed}});
    }
    io::json root = {{"format", kRestartFormat},
                     {"next_cycle", state.next_cycle},
                     {"virtual_now", state.virtual_now},
                     {"next_task_id", state.next_task_id},
                     {"config_digest", state.config_digest},
                     {"replicas", replicas}};
    auto out = io::open_out(path, false);
    out << root.dump(2) << '\n';
}

inline RestartState read_restart(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    io::json root = io::json::parse(in);
    if (!root.contains("format") || root.at("format").get<std::string>() != kRestartFormat)
        throw Error(ErrorCode::InvalidValue,
                    path.string() + ": unknown restart format, refusing to resume");
    RestartState state;
    state.next_cycle = root.at("next_cycle").get<long>();
    state.virtual_now = root.at("virtual_now").get<double>();
    state.next_task_id = root.at("next_task_id").get<std::int64_t>();
    state.config_digest = root.at("config_digest").get<std::uint64_t>();
    for (const auto& node : root.at("replicas")) {
        ReplicaState replica;
        replica.id = node.at("id").get<int>();
        replica.coords = node.at("coords").get<std::vector<int>>();
        replica.configuration = node.at("configuration").get<std::vector<double>>();
        replica.velocities = node.at("velocities").get<std::vector<double>>();
        replica.cycle_count = node.at("cycle_count").get<long>();
        const std::string status = node.at("status").get<std::string>();
        replica.status = status == "failed" ? ReplicaStatus::Failed
                         : status == "done" ? ReplicaStatus::Done
                                            : ReplicaStatus::Idle;
        replica.rng_seed = node.at("rng_seed").get<std::uint64_t>();
        state.replicas.push_back(std::move(replica));
    }
    return state;
}

}  // namespace repex
