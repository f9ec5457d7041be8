#include "regtsc/runner.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/observation.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {
constexpr uint64_t kRandomPolicyStream = 0x9A9A;
}

const char *policy_name(Policy policy) {
    switch (policy) {
    case Policy::MockHeuristic: return "MockHeuristic";
    case Policy::Remote: return "Remote";
    case Policy::FixedTime: return "FixedTime";
    case Policy::Random: return "Random";
    }
    return "MockHeuristic";
}

Policy policy_from_name(const std::string &name) {
    std::string n = to_lower(name);
    if (n == "mockheuristic" || n == "mock") return Policy::MockHeuristic;
    if (n == "remote") return Policy::Remote;
    if (n == "fixedtime" || n == "fixed") return Policy::FixedTime;
    if (n == "random") return Policy::Random;
    throw ParseError("unknown policy: " + name);
}

Scenario load_scenario(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError("invalid scenario JSON in " + path + ": " + e.what());
    }
    Scenario sc;
    sc.source_path = path;
    try {
        sc.network_ref = j.at("network").get<std::string>();
        if (j.contains("policy")) sc.default_policy = policy_from_name(j.at("policy"));
        const auto &c = j.at("config");
        SimulationConfig &cfg = sc.config;
        cfg.horizon_steps = c.value("T", cfg.horizon_steps);
        cfg.step_length = c.value("step_length", cfg.step_length);
        cfg.decision_interval = c.value("decision_interval", cfg.decision_interval);
        cfg.emergency_count = c.value("M", cfg.emergency_count);
        cfg.arrival_rate = c.value("arrival_rate", cfg.arrival_rate);
        cfg.seed = c.value("seed", cfg.seed);
        cfg.v_stop = c.value("v_stop", cfg.v_stop);
        cfg.saturation_headway = c.value("saturation_headway", cfg.saturation_headway);
        cfg.free_flow_speed = c.value("free_flow_speed", cfg.free_flow_speed);
        cfg.queue_gap = c.value("queue_gap", cfg.queue_gap);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError("malformed scenario " + path + ": " + e.what());
    }
    sc.config.validate();

    // Relative network paths resolve against the scenario's directory.
    if (sc.network_ref.rfind("builtin:", 0) != 0) {
        fs::path net_path(sc.network_ref);
        if (net_path.is_relative()) {
            sc.network_ref = (fs::path(path).parent_path() / net_path).string();
        }
    }
    return sc;
}

void RunManifest::validate() const {
    if (scenario_path.empty()) throw ValidationError("manifest needs a scenario path");
    if (policy == Policy::Remote && backend.kind != BackendKind::Remote)
        throw ValidationError("Remote policy requires a Remote backend");
    if (retrieval_k < 1) throw ValidationError("retrieval K must be >= 1");
    reward.validate();
}

namespace {

struct AgentContext {
    GuidanceRepository repo;
    ConfiguredChatBackend chat;
    ConfiguredEmbeddingBackend embeddings;

    AgentContext(const BackendConfig &config) : chat(config), embeddings(config) {}
};

std::string sanitize_filename(const std::string &name) {
    std::string out;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        out.push_back(ok ? c : '_');
    }
    return out;
}

struct PendingCase {
    TrafficObservation obs;
    EmergencyVehicleState ev;
    int action = 0;
    int ev_vehicle_id = -1;
};

} // namespace

RunResult run(const RunManifest &manifest) {
    manifest.validate();
    Scenario scenario = load_scenario(manifest.scenario_path);
    SimulationConfig config = scenario.config;
    if (manifest.seed) config.seed = *manifest.seed;
    if (manifest.decision_interval) config.decision_interval = *manifest.decision_interval;
    config.validate();

    RoadNetwork net = resolve_network(scenario.network_ref);
    const int intersection_count = (int)net.intersections.size();
    const bool agent_policy =
        manifest.policy == Policy::MockHeuristic || manifest.policy == Policy::Remote;

    std::optional<AgentContext> agent;
    if (agent_policy) {
        BackendConfig backend = manifest.backend;
        if (manifest.policy == Policy::MockHeuristic) backend.kind = BackendKind::Mock;
        agent.emplace(backend);
        if (!manifest.guidance_items_path.empty()) {
            agent->repo = load_repository(manifest.guidance_items_path,
                                          manifest.guidance_vectors_path);
        } else {
            agent->repo = build_repository(builtin_case_base(), agent->chat, agent->embeddings);
        }
    }

    Simulation sim(net, config);
    auto random_rng = make_rng(config.seed, kRandomPolicyStream);

    RunResult result;
    std::vector<int> phases(intersection_count, 1);
    std::vector<int> prev_ql(intersection_count, 0);
    std::vector<ReasoningTrajectory> pending(intersection_count);
    std::vector<bool> has_pending(intersection_count, false);
    std::vector<PendingCase> pending_cases;
    std::ofstream case_log;
    if (!manifest.case_log_path.empty()) {
        case_log.open(manifest.case_log_path);
        if (!case_log) throw IoError("cannot write case log: " + manifest.case_log_path);
    }

    std::vector<StepOutcome> interval_tail(1);
    std::vector<ordered_json> step_log;
    int decision_index = 0;

    auto settle_rewards = [&](const StepOutcome &outcome) {
        std::vector<int> ql = sim.queue_lengths();
        for (int i = 0; i < intersection_count; ++i) {
            if (!has_pending[i]) continue;
            pending[i].reward = compute_reward(prev_ql[i], ql[i],
                                               outcome.per_intersection[i].wte_interval_s,
                                               manifest.reward);
            result.trajectories.push_back(pending[i]);
            has_pending[i] = false;
        }
        prev_ql = ql;
    };

    auto complete_cases = [&]() {
        if (pending_cases.empty()) return;
        auto evs = sim.active_emergencies();
        for (auto &pc : pending_cases) {
            const EmergencyVehicleState *ev_next = nullptr;
            for (const auto &ev : evs) {
                if (ev.vehicle_id == pc.ev_vehicle_id) ev_next = &ev;
            }
            if (!ev_next) continue; // vehicle finished inside the interval
            HistoricalCase c;
            c.obs = std::move(pc.obs);
            c.ev = std::move(pc.ev);
            c.action = pc.action;
            const Intersection *inter = net.intersection(c.obs.intersection_id);
            c.obs_next = observe(sim, *inter);
            c.ev_next = *ev_next;
            case_log << historical_case_to_json(c) << "\n";
        }
        pending_cases.clear();
    };

    while (!sim.finished()) {
        const int step = sim.current_step();
        if (step % config.decision_interval == 0) {
            if (step > 0) settle_rewards(interval_tail[0]);
            complete_cases();

            auto emergencies = sim.active_emergencies();
            std::vector<AgentDecision> decisions(intersection_count);
            std::vector<ReasoningMode> modes(intersection_count, ReasoningMode::Lightweight);

            if (manifest.policy == Policy::FixedTime) {
                for (int i = 0; i < intersection_count; ++i) {
                    int j = net.intersections[i].phase_count();
                    phases[i] = 1 + decision_index % j;
                }
            } else if (manifest.policy == Policy::Random) {
                for (int i = 0; i < intersection_count; ++i) {
                    int j = net.intersections[i].phase_count();
                    std::uniform_int_distribution<int> pick(1, j);
                    phases[i] = pick(random_rng);
                }
            } else {
                std::vector<std::exception_ptr> errors(intersection_count);
#pragma omp parallel for schedule(dynamic)
                for (int i = 0; i < intersection_count; ++i) {
                    try {
                        const Intersection &inter = net.intersections[i];
                        TrafficObservation obs = observe(sim, inter);
                        ReasoningMode mode = select_mode(net, inter, emergencies);
                        modes[i] = mode;
                        if (mode == ReasoningMode::Deep) {
                            const EmergencyVehicleState *ev = nullptr;
                            for (const auto &cand : emergencies) {
                                for (size_t r = cand.route_pos;
                                     r < cand.planned_route.size() && !ev; ++r) {
                                    const Intersection *head =
                                        net.head_intersection(cand.planned_route[r]);
                                    if (head && head->id == inter.id) ev = &cand;
                                }
                                if (ev) break;
                            }
                            std::string query = generate_query(obs, *ev, agent->chat);
                            EmbeddingVector qvec = embed(query, agent->embeddings);
                            auto scored = retrieve(qvec, agent->repo, manifest.retrieval_k);
                            std::vector<GuidanceItem> guidance;
                            for (auto &sg : scored) guidance.push_back(std::move(sg.item));
                            decisions[i] = decide(obs, mode, ev, &guidance, agent->chat,
                                                  agent->chat.config().model);
                        } else {
                            decisions[i] = decide(obs, mode, nullptr, nullptr, agent->chat,
                                                  agent->chat.config().model);
                        }
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
                for (int i = 0; i < intersection_count; ++i) {
                    if (errors[i]) std::rethrow_exception(errors[i]);
                }
                for (int i = 0; i < intersection_count; ++i) phases[i] = decisions[i].phase;
            }

            for (int i = 0; i < intersection_count; ++i) {
                DecisionRecord rec;
                rec.step = step;
                rec.intersection_id = net.intersections[i].id;
                rec.mode = agent_policy ? modes[i] : ReasoningMode::Lightweight;
                rec.phase = phases[i];
                rec.fallback_used = agent_policy && decisions[i].fallback_used;
                rec.prompt_hash = digest_hex(agent_policy ? decisions[i].prompt : "");
                rec.response_hash = digest_hex(agent_policy ? decisions[i].response : "");
                result.decisions.push_back(std::move(rec));

                if (agent_policy) {
                    // Same parse-validity gate as the agent: fallback
                    // decisions never enter the buffers.
                    if (!decisions[i].fallback_used) {
                        ReasoningTrajectory t;
                        t.prompt = decisions[i].prompt;
                        t.response = decisions[i].response;
                        t.type_signature = net.intersections[i].type_signature;
                        t.step = step;
                        t.intersection_id = net.intersections[i].id;
                        pending[i] = std::move(t);
                        has_pending[i] = true;
                    }

                    if (case_log.is_open() && modes[i] == ReasoningMode::Deep) {
                        for (const auto &ev : emergencies) {
                            const Intersection *head = net.head_intersection(ev.current_lane);
                            if (head && head->id == net.intersections[i].id) {
                                PendingCase pc;
                                pc.obs = observe(sim, net.intersections[i]);
                                pc.ev = ev;
                                pc.action = phases[i];
                                pc.ev_vehicle_id = ev.vehicle_id;
                                pending_cases.push_back(std::move(pc));
                                break;
                            }
                        }
                    }
                }
            }
            ++decision_index;
        }

        StepOutcome outcome = sim.step(phases);
        if (sim.current_step() % config.decision_interval == 0 || sim.finished()) {
            interval_tail[0] = outcome;
            if (manifest.write_step_log) {
                ordered_json j;
                j["step"] = outcome.step;
                j["spawned_total"] = outcome.spawned_total;
                j["active"] = outcome.active_vehicles;
                j["completed"] = outcome.completed_vehicles;
                ordered_json per = ordered_json::array();
                for (int i = 0; i < intersection_count; ++i) {
                    per.push_back({{"intersection", net.intersections[i].id},
                                   {"queue_length", outcome.per_intersection[i].queue_length},
                                   {"wte_interval_s", outcome.per_intersection[i].wte_interval_s},
                                   {"discharged", outcome.per_intersection[i].discharged}});
                }
                j["per_intersection"] = std::move(per);
                step_log.push_back(std::move(j));
            }
        }
    }
    settle_rewards(interval_tail[0]);
    complete_cases();

    result.metrics = sim.metrics();

    if (agent_policy) {
        std::map<std::string, ExperienceBuffer> buffers;
        for (const auto &t : result.trajectories) {
            auto it = buffers.find(t.type_signature);
            if (it == buffers.end())
                it = buffers.emplace(t.type_signature, ExperienceBuffer(t.type_signature)).first;
            it->second.append(t);
        }
        for (auto &[sig, buf] : buffers) result.buffers.push_back(std::move(buf));
    }

    if (!manifest.out_dir.empty()) {
        fs::create_directories(manifest.out_dir);
        {
            std::ofstream out(fs::path(manifest.out_dir) / "metrics.json");
            if (!out) throw IoError("cannot write metrics.json under " + manifest.out_dir);
            out << metrics_to_json(result.metrics);
        }
        {
            std::ofstream out(fs::path(manifest.out_dir) / "decisions.jsonl");
            for (const auto &d : result.decisions) {
                ordered_json j{{"step", d.step},
                               {"intersection", d.intersection_id},
                               {"mode", reasoning_mode_name(d.mode)},
                               {"phase", d.phase},
                               {"fallback_used", d.fallback_used},
                               {"prompt_hash", d.prompt_hash},
                               {"response_hash", d.response_hash}};
                out << j.dump() << "\n";
            }
        }
        if (!result.buffers.empty()) {
            fs::path buf_dir = fs::path(manifest.out_dir) / "buffers";
            fs::create_directories(buf_dir);
            for (const auto &buf : result.buffers) {
                save_buffer(buf,
                            (buf_dir / (sanitize_filename(buf.type_signature()) + ".jsonl"))
                                .string());
            }
        }
        if (manifest.write_step_log) {
            std::ofstream out(fs::path(manifest.out_dir) / "steps.jsonl");
            for (const auto &j : step_log) out << j.dump() << "\n";
        }
    }
    return result;
}

CollectStats collect_imitation(const RunManifest &manifest, const FilterParams &filter,
                               const std::string &dataset_path, bool filter_disabled) {
    if (!filter_disabled) filter.validate();
    RunResult result = run(manifest);

    CollectStats stats;
    stats.captured = (int)result.trajectories.size();

    // Forward windows run over each intersection's own decision sequence.
    std::map<std::string, std::vector<const ReasoningTrajectory *>> per_intersection;
    for (const auto &t : result.trajectories) per_intersection[t.intersection_id].push_back(&t);

    std::vector<const ReasoningTrajectory *> kept;
    for (auto &[id, seq] : per_intersection) {
        std::sort(seq.begin(), seq.end(),
                  [](const ReasoningTrajectory *a, const ReasoningTrajectory *b) {
                      return a->step < b->step;
                  });
        for (size_t d = 0; d < seq.size(); ++d) {
            if (filter_disabled) {
                kept.push_back(seq[d]);
                continue;
            }
            if (d + filter.t_re > seq.size()) {
                ++stats.dropped_no_window;
                continue;
            }
            std::vector<double> window;
            window.reserve(filter.t_re);
            for (int k = 0; k < filter.t_re; ++k) window.push_back(seq[d + k]->reward);
            if (filter_trajectory(window, filter)) {
                kept.push_back(seq[d]);
            } else {
                ++stats.dropped_by_filter;
            }
        }
    }
    std::sort(kept.begin(), kept.end(),
              [](const ReasoningTrajectory *a, const ReasoningTrajectory *b) {
                  if (a->step != b->step) return a->step < b->step;
                  return a->intersection_id < b->intersection_id;
              });

    stats.kept = (int)kept.size();
    if (kept.empty()) {
        std::ofstream out(dataset_path); // empty dataset, caller reports the warning
        if (!out) throw IoError("cannot write dataset file: " + dataset_path);
        return stats;
    }
    std::vector<FineTuneRecord> records;
    records.reserve(kept.size());
    for (const auto *t : kept) records.push_back({t->prompt, t->response, 1.0});
    export_dataset(records, dataset_path, DatasetKind::Imitation);
    return stats;
}

GuidanceRepository build_guidance(const std::string &case_log_path, const BackendConfig &backend,
                                  const std::string &items_out, const std::string &vectors_out) {
    std::ifstream in(case_log_path);
    if (!in) throw IoError("cannot open case log: " + case_log_path);
    std::vector<HistoricalCase> cases;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            cases.push_back(historical_case_from_json(line));
        } catch (const ParseError &e) {
            throw ParseError(case_log_path + " line " + std::to_string(line_no) + ": " +
                             e.what());
        }
    }
    if (cases.empty()) throw ValidationError("case log has no cases: " + case_log_path);

    ConfiguredChatBackend chat(backend);
    ConfiguredEmbeddingBackend embeddings(backend);
    GuidanceRepository repo = build_repository(cases, chat, embeddings);
    save_repository(repo, items_out, vectors_out);
    return repo;
}

ComparisonReport compare(const std::vector<RunManifest> &manifests,
                         const std::string &baseline_policy, const std::string &csv_out) {
    if (manifests.size() < 2) throw ValidationError("compare needs at least two manifests");
    for (size_t i = 1; i < manifests.size(); ++i) {
        if (manifests[i].scenario_path != manifests[0].scenario_path)
            throw ScenarioMismatchError("manifests reference different scenarios");
        if (manifests[i].seed != manifests[0].seed)
            throw ScenarioMismatchError("manifests use different seeds");
        if (manifests[i].decision_interval != manifests[0].decision_interval)
            throw ScenarioMismatchError("manifests use different decision intervals");
    }

    ComparisonReport report;
    report.baseline = baseline_policy;
    for (const auto &m : manifests) {
        ComparisonRow row;
        row.policy = policy_name(m.policy);
        row.metrics = run(m).metrics;
        report.rows.push_back(std::move(row));
    }

    const ComparisonRow *base = nullptr;
    for (const auto &row : report.rows) {
        if (row.policy == baseline_policy) base = &row;
    }
    if (!base) throw ValidationError("baseline policy " + baseline_policy + " not among runs");
    auto pct = [](double value, double baseline) {
        return baseline != 0.0 ? (value - baseline) / baseline * 100.0 : 0.0;
    };
    for (auto &row : report.rows) {
        row.att_delta_pct = pct(row.metrics.att, base->metrics.att);
        row.awt_delta_pct = pct(row.metrics.awt, base->metrics.awt);
        row.aql_delta_pct = pct(row.metrics.aql, base->metrics.aql);
    }

    if (!csv_out.empty()) {
        std::ofstream out(csv_out);
        if (!out) throw IoError("cannot write " + csv_out);
        out << comparison_to_csv(report);
        fs::path json_path = fs::path(csv_out).replace_extension(".report.json");
        std::ofstream jout(json_path);
        if (!jout) throw IoError("cannot write " + json_path.string());
        jout << comparison_to_json(report);
    }
    return report;
}

std::string comparison_to_csv(const ComparisonReport &report) {
    size_t max_ev = 0;
    for (const auto &row : report.rows)
        max_ev = std::max(max_ev, row.metrics.emergency_travel_times.size());
    std::ostringstream out;
    out << "policy,att,awt,aql,atte,awte";
    for (size_t e = 0; e < max_ev; ++e) out << ",ev_tt_" << (e + 1);
    out << "\n";
    for (const auto &row : report.rows) {
        out << row.policy << "," << format_fixed(row.metrics.att, 3) << ","
            << format_fixed(row.metrics.awt, 3) << "," << format_fixed(row.metrics.aql, 3) << ",";
        if (row.metrics.atte) out << format_fixed(*row.metrics.atte, 3);
        out << ",";
        if (row.metrics.awte) out << format_fixed(*row.metrics.awte, 3);
        for (size_t e = 0; e < max_ev; ++e) {
            out << ",";
            if (e < row.metrics.emergency_travel_times.size())
                out << format_fixed(row.metrics.emergency_travel_times[e], 3);
        }
        out << "\n";
    }
    return out.str();
}

std::string comparison_to_json(const ComparisonReport &report) {
    ordered_json j;
    j["baseline"] = report.baseline;
    j["rows"] = ordered_json::array();
    for (const auto &row : report.rows) {
        ordered_json r;
        r["policy"] = row.policy;
        r["metrics"] = ordered_json::parse(metrics_to_json(row.metrics));
        r["att_delta_pct"] = row.att_delta_pct;
        r["awt_delta_pct"] = row.awt_delta_pct;
        r["aql_delta_pct"] = row.aql_delta_pct;
        j["rows"].push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

} // namespace regtsc
