#ifndef PWEXP_SURVIVAL_DATA_HPP
#define PWEXP_SURVIVAL_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwexp {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Timescale { years, months, days };

inline const char* to_string(Timescale ts) {
    switch (ts) {
        case Timescale::months: return "months";
        case Timescale::days: return "days";
        default: return "years";
    }
}

inline Timescale parse_timescale(const std::string& name) {
    if (name == "years") return Timescale::years;
    if (name == "months") return Timescale::months;
    if (name == "days") return Timescale::days;
    throw ValidationError("unknown timescale '" + name + "' (expected years, months or days)");
}

struct Observation {
    double time = 0.0;
    bool event = false;
};

// Right-censored survival sample, stored sorted ascending by time.
// At tied times events sort before censored observations.
struct SurvivalDataset {
    std::vector<Observation> observations;
    Timescale timescale = Timescale::years;

    int size() const { return static_cast<int>(observations.size()); }
    int event_count() const {
        int d = 0;
        for (const auto& o : observations) d += o.event ? 1 : 0;
        return d;
    }
    double total_time() const {
        double t = 0.0;
        for (const auto& o : observations) t += o.time;
        return t;
    }
    double max_time() const { return observations.empty() ? 0.0 : observations.back().time; }
};

inline SurvivalDataset load_dataset(const std::vector<std::pair<double, int>>& records,
                                    Timescale timescale = Timescale::years) {
    SurvivalDataset ds;
    ds.timescale = timescale;
    ds.observations.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& [time, status] = records[i];
        const std::string row = "row " + std::to_string(i + 1);
        if (!std::isfinite(time) || time <= 0.0)
            throw ValidationError(row + ": time must be a positive finite number");
        if (status != 0 && status != 1)
            throw ValidationError(row + ": status must be 0 or 1");
        ds.observations.push_back({time, status == 1});
    }
    std::stable_sort(ds.observations.begin(), ds.observations.end(),
                     [](const Observation& a, const Observation& b) {
                         if (a.time != b.time) return a.time < b.time;
                         return a.event && !b.event;
                     });
    if (ds.event_count() == 0) throw ValidationError("no events: at least one observation must have status 1");
    return ds;
}

// CSV with header `time,status`; columns accepted in either order.
inline SurvivalDataset load_dataset_csv(std::istream& in, Timescale timescale = Timescale::years) {
    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string field;
        std::stringstream ss(line);
        while (std::getline(ss, field, ',')) {
            while (!field.empty() && (field.back() == '\r' || field.back() == ' ' || field.back() == '\t'))
                field.pop_back();
            std::size_t start = 0;
            while (start < field.size() && (field[start] == ' ' || field[start] == '\t')) ++start;
            fields.push_back(field.substr(start));
        }
        return fields;
    };

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty input: expected header 'time,status'");
    auto header = split(line);
    int time_col = -1, status_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "time") time_col = static_cast<int>(c);
        else if (header[c] == "status") status_col = static_cast<int>(c);
        else throw ValidationError("unexpected column '" + header[c] + "' (expected header 'time,status')");
    }
    if (time_col < 0 || status_col < 0)
        throw ValidationError("missing column: header must name both 'time' and 'status'");

    auto parse_number = [](const std::string& text, const char* what, std::size_t row) {
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size() || text.empty())
            throw ValidationError("row " + std::to_string(row) + ": non-numeric " + what + " '" + text + "'");
        return value;
    };

    std::vector<std::pair<double, int>> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (static_cast<int>(fields.size()) <= std::max(time_col, status_col))
            throw ValidationError("row " + std::to_string(row) + ": expected 2 fields");
        const double time = parse_number(fields[time_col], "time", row);
        const double status = parse_number(fields[status_col], "status", row);
        if (!std::isfinite(time) || time <= 0.0)
            throw ValidationError("row " + std::to_string(row) + ": time must be a positive finite number");
        if (status != 0.0 && status != 1.0)
            throw ValidationError("row " + std::to_string(row) + ": status must be 0 or 1");
        records.emplace_back(time, static_cast<int>(status));
    }
    return load_dataset(records, timescale);
}

inline SurvivalDataset load_dataset_csv_file(const std::string& path, Timescale timescale = Timescale::years) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file: " + path);
    return load_dataset_csv(in, timescale);
}

// Administrative censoring at `horizon`: observations beyond it become
// censored at the horizon (events exactly at the horizon are kept).
inline SurvivalDataset truncate_follow_up(const SurvivalDataset& ds, double horizon) {
    if (!(horizon > 0.0)) throw ValidationError("truncate_follow_up: horizon must be positive");
    std::vector<std::pair<double, int>> records;
    records.reserve(ds.observations.size());
    for (const auto& o : ds.observations) {
        if (o.time > horizon) records.emplace_back(horizon, 0);
        else records.emplace_back(o.time, o.event ? 1 : 0);
    }
    return load_dataset(records, ds.timescale);
}

// Gap-time sufficient statistics: distinct event times x_i with event
// multiplicities m_i, total at-risk exposure y_i accumulated on (x_{i-1}, x_i],
// and the residual exposure of observations censored after the last event.
// A censoring time equal to an event time counts as censored just after it,
// so the subject is still in the risk set at that event time.
struct GapTimeData {
    std::vector<double> event_times;    // x, strictly increasing
    std::vector<int> multiplicities;    // m
    std::vector<double> gap_exposures;  // y
    std::vector<int> cumulative_events; // running sums of m
    int total_events = 0;               // d
    double trailing_exposure = 0.0;

    // derived lookups
    std::vector<double> exposure_prefix; // size d'+1, prefix sums of y
    std::vector<int> boundary_index;     // event count -> distinct-time prefix position, -1 if inside a tie
    std::vector<double> time_of_event;   // 1-based: time of the e-th individual event

    int distinct_count() const { return static_cast<int>(event_times.size()); }

    bool is_boundary(int event_count) const {
        return event_count >= 0 && event_count <= total_events && boundary_index[event_count] >= 0;
    }

    // Total exposure attributed to events in (a, b], both boundaries;
    // the trailing censored exposure belongs to the final segment.
    double exposure_between(int a, int b) const {
        double t = exposure_prefix[boundary_index[b]] - exposure_prefix[boundary_index[a]];
        if (b == total_events) t += trailing_exposure;
        return t;
    }

    double time_at(int event_count) const { return time_of_event[event_count]; }

    void build_lookups() {
        const int dp = distinct_count();
        cumulative_events.assign(dp, 0);
        int running = 0;
        for (int i = 0; i < dp; ++i) {
            running += multiplicities[i];
            cumulative_events[i] = running;
        }
        total_events = running;

        exposure_prefix.assign(dp + 1, 0.0);
        for (int i = 0; i < dp; ++i) exposure_prefix[i + 1] = exposure_prefix[i] + gap_exposures[i];

        boundary_index.assign(total_events + 1, -1);
        boundary_index[0] = 0;
        for (int i = 0; i < dp; ++i) boundary_index[cumulative_events[i]] = i + 1;

        time_of_event.assign(total_events + 1, 0.0);
        int e = 1;
        for (int i = 0; i < dp; ++i)
            for (int rep = 0; rep < multiplicities[i]; ++rep) time_of_event[e++] = event_times[i];
    }

    // Direct construction for tests and synthetic inputs.
    static GapTimeData from_parts(std::vector<double> x, std::vector<int> m, std::vector<double> y,
                                  double trailing = 0.0) {
        if (x.size() != m.size() || x.size() != y.size())
            throw std::invalid_argument("from_parts: mismatched field lengths");
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("from_parts: event times must increase");
            if (m[i] < 1) throw std::invalid_argument("from_parts: multiplicities must be positive");
            if (y[i] < 0.0) throw std::invalid_argument("from_parts: exposures must be nonnegative");
        }
        GapTimeData g;
        g.event_times = std::move(x);
        g.multiplicities = std::move(m);
        g.gap_exposures = std::move(y);
        g.trailing_exposure = trailing;
        g.build_lookups();
        return g;
    }
};

inline GapTimeData gap_times(const SurvivalDataset& ds) {
    const auto& obs = ds.observations;
    const int n = ds.size();

    GapTimeData g;
    for (int i = 0; i < n; ++i) {
        if (!obs[i].event) continue;
        if (!g.event_times.empty() && obs[i].time == g.event_times.back()) {
            ++g.multiplicities.back();
        } else {
            g.event_times.push_back(obs[i].time);
            g.multiplicities.push_back(1);
        }
    }
    const int dp = static_cast<int>(g.event_times.size());
    g.gap_exposures.assign(dp, 0.0);

    // Risk set at x_i counts every subject with observed time >= x_i.
    int at_risk = n;
    int cursor = 0; // observations with time < current x already passed
    double prev_time = 0.0;
    for (int i = 0; i < dp; ++i) {
        const double x = g.event_times[i];
        while (cursor < n && obs[cursor].time < x) {
            if (!obs[cursor].event) g.gap_exposures[i] += obs[cursor].time - prev_time;
            --at_risk;
            ++cursor;
        }
        g.gap_exposures[i] += (x - prev_time) * at_risk;
        prev_time = x;
    }
    while (cursor < n) {
        if (!obs[cursor].event) g.trailing_exposure += obs[cursor].time - prev_time;
        ++cursor;
    }

    g.build_lookups();
    return g;
}

struct KMCurve {
    std::vector<double> step_times;
    std::vector<double> survival_probs;

    double value_at(double t) const {
        // S(t) = 1 before the first event; right-continuous step function.
        auto it = std::upper_bound(step_times.begin(), step_times.end(), t);
        if (it == step_times.begin()) return 1.0;
        return survival_probs[static_cast<std::size_t>(it - step_times.begin()) - 1];
    }
};

inline KMCurve kaplan_meier(const SurvivalDataset& ds) {
    const auto& obs = ds.observations;
    const int n = ds.size();
    KMCurve km;
    double surv = 1.0;
    int at_risk = n;
    int cursor = 0;
    int i = 0;
    while (i < n) {
        // advance to next distinct event time
        while (i < n && !obs[i].event) ++i;
        if (i >= n) break;
        const double x = obs[i].time;
        while (cursor < n && obs[cursor].time < x) {
            --at_risk;
            ++cursor;
        }
        int deaths = 0;
        while (i < n && obs[i].event && obs[i].time == x) {
            ++deaths;
            ++i;
        }
        surv *= 1.0 - static_cast<double>(deaths) / at_risk;
        km.step_times.push_back(x);
        km.survival_probs.push_back(surv);
    }
    return km;
}

} // namespace pwexp

#endif
