// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "apptrend/csv.hpp"
#include "apptrend/day.hpp"

namespace apptrend {

/// One observation: a user interacted with an app on a calendar day.
/// Timestamps finer than a day are dropped at parse time.
struct UsageRecord {
    std::string user_id;
    std::string app_id;
    Day day;

    bool operator==(const UsageRecord&) const = default;
};

/// app_id -> leaf category name. An app maps to at most one category;
/// conflicting assignments are rejected.
class CategoryMap {
public:
    void assign(const std::string& app, const std::string& category) {
        if (category.empty()) throw std::invalid_argument("empty category for app '" + app + "'");
        auto [it, inserted] = entries_.try_emplace(app, category);
        if (!inserted && it->second != category)
            throw std::invalid_argument("conflicting categories for app '" + app + "': '" +
                                        it->second + "' vs '" + category + "'");
    }

    const std::string* find(const std::string& app) const {
        auto it = entries_.find(app);
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    bool operator==(const CategoryMap&) const = default;

private:
    std::unordered_map<std::string, std::string> entries_;
};

class DatasetBuilder;

/// Immutable, deduplicated collection of usage records with an observation
/// window and category metadata. Records are stored columnar with interned
/// ids and sorted by (app, day, user), so per-app slices are contiguous and
/// distinct-user day counts reduce to row counts.
class Dataset {
public:
    struct Row {
        std::uint32_t user;
        std::uint32_t app;
        Day day;

        friend bool operator==(const Row&, const Row&) = default;
    };

    std::span<const Row> rows() const { return rows_; }
    std::size_t record_count() const { return rows_.size(); }

    Day window_start() const { return window_start_; }
    Day window_end() const { return window_end_; }
    const CategoryMap& categories() const { return categories_; }

    std::size_t user_count() const { return users_.size(); }
    std::size_t app_count() const { return apps_.size(); }
    const std::string& user_name(std::uint32_t idx) const { return users_[idx]; }
    const std::string& app_name(std::uint32_t idx) const { return apps_[idx]; }

    std::optional<std::uint32_t> app_index(std::string_view app) const {
        auto it = app_lookup_.find(std::string(app));
        return it == app_lookup_.end() ? std::nullopt : std::optional(it->second);
    }
    std::optional<std::uint32_t> user_index(std::string_view user) const {
        auto it = user_lookup_.find(std::string(user));
        return it == user_lookup_.end() ? std::nullopt : std::optional(it->second);
    }

    std::uint32_t require_app(std::string_view app) const {
        auto idx = app_index(app);
        if (!idx) throw std::invalid_argument("unknown app: " + std::string(app));
        return *idx;
    }

    /// Contiguous rows for one app, sorted by (day, user).
    std::span<const Row> rows_for_app(std::uint32_t app_idx) const {
        return std::span(rows_).subspan(app_offsets_[app_idx],
                                        app_offsets_[app_idx + 1] - app_offsets_[app_idx]);
    }

    UsageRecord record_at(std::size_t i) const {
        const Row& r = rows_[i];
        return UsageRecord{users_[r.user], apps_[r.app], r.day};
    }

    /// Content equality irrespective of interning order. Row order within
    /// an (app, day) group follows intern indices, so both sides are
    /// resolved to named records and sorted before comparing.
    friend bool operator==(const Dataset& a, const Dataset& b) {
        if (a.rows_.size() != b.rows_.size()) return false;
        if (a.window_start_ != b.window_start_ || a.window_end_ != b.window_end_) return false;
        if (!(a.categories_ == b.categories_)) return false;
        auto resolved = [](const Dataset& ds) {
            std::vector<UsageRecord> recs;
            recs.reserve(ds.rows_.size());
            for (std::size_t i = 0; i < ds.rows_.size(); ++i) recs.push_back(ds.record_at(i));
            std::sort(recs.begin(), recs.end(), [](const UsageRecord& x, const UsageRecord& y) {
                return std::tie(x.app_id, x.day, x.user_id) < std::tie(y.app_id, y.day, y.user_id);
            });
            return recs;
        };
        return resolved(a) == resolved(b);
    }

private:
    friend class DatasetBuilder;

    std::vector<std::string> users_;
    std::vector<std::string> apps_;
    std::unordered_map<std::string, std::uint32_t> user_lookup_;
    std::unordered_map<std::string, std::uint32_t> app_lookup_;
    std::vector<Row> rows_;
    std::vector<std::size_t> app_offsets_; // app_count()+1 entries
    Day window_start_{};
    Day window_end_{};
    CategoryMap categories_;
};

/// Accumulates records and produces a finished Dataset. add() interns ids
/// immediately; nothing row-sized is kept as strings, which matters at
/// tens of millions of records.
class DatasetBuilder {
public:
    std::uint32_t intern_user(std::string_view user) {
        return intern(user, users_, user_lookup_, "user");
    }
    std::uint32_t intern_app(std::string_view app) {
        return intern(app, apps_, app_lookup_, "app");
    }

    void add(std::string_view user, std::string_view app, Day day) {
        add_interned(intern_user(user), intern_app(app), day);
    }

    /// Fast path for callers that pre-interned ids (e.g. the generator).
    void add_interned(std::uint32_t user, std::uint32_t app, Day day) {
        rows_.push_back({user, app, day});
    }

    void set_category(const std::string& app, const std::string& category) {
        categories_.assign(app, category);
    }

    /// Sorts, deduplicates on (user, app, day), resolves the window
    /// (inferred from the data unless overridden) and freezes the result.
    Dataset finish(std::optional<Day> window_start = std::nullopt,
                   std::optional<Day> window_end = std::nullopt) {
        if (rows_.empty()) throw std::runtime_error("no records");

        std::sort(rows_.begin(), rows_.end(), [](const Dataset::Row& a, const Dataset::Row& b) {
            if (a.app != b.app) return a.app < b.app;
            if (a.day != b.day) return a.day < b.day;
            return a.user < b.user;
        });
        rows_.erase(std::unique(rows_.begin(), rows_.end()), rows_.end());

        Day lo = rows_.front().day, hi = rows_.front().day;
        for (const auto& r : rows_) {
            lo = std::min(lo, r.day);
            hi = std::max(hi, r.day);
        }
        Day ws = window_start.value_or(lo);
        Day we = window_end.value_or(hi);
        if (ws > we) throw std::invalid_argument("window start after window end");
        if (lo < ws || hi > we)
            throw std::invalid_argument("record dated " + format_day(lo < ws ? lo : hi) +
                                        " falls outside the declared window [" + format_day(ws) +
                                        ", " + format_day(we) + "]");

        Dataset ds;
        ds.users_ = std::move(users_);
        ds.apps_ = std::move(apps_);
        ds.user_lookup_ = std::move(user_lookup_);
        ds.app_lookup_ = std::move(app_lookup_);
        ds.rows_ = std::move(rows_);
        ds.window_start_ = ws;
        ds.window_end_ = we;
        ds.categories_ = std::move(categories_);

        ds.app_offsets_.assign(ds.apps_.size() + 1, 0);
        for (const auto& r : ds.rows_) ++ds.app_offsets_[r.app + 1];
        for (std::size_t i = 1; i < ds.app_offsets_.size(); ++i)
            ds.app_offsets_[i] += ds.app_offsets_[i - 1];
        return ds;
    }

private:
    std::uint32_t intern(std::string_view name, std::vector<std::string>& table,
                         std::unordered_map<std::string, std::uint32_t>& lookup,
                         const char* what) {
        if (name.empty()) throw std::invalid_argument(std::string("empty ") + what + " id");
        auto it = lookup.find(std::string(name));
        if (it != lookup.end()) return it->second;
        std::uint32_t idx = static_cast<std::uint32_t>(table.size());
        table.emplace_back(name);
        lookup.emplace(table.back(), idx);
        return idx;
    }

    std::vector<std::string> users_;
    std::vector<std::string> apps_;
    std::unordered_map<std::string, std::uint32_t> user_lookup_;
    std::unordered_map<std::string, std::uint32_t> app_lookup_;
    std::vector<Dataset::Row> rows_;
    CategoryMap categories_;
};

enum class LogFormat { jsonl, csv };

inline LogFormat format_from_path(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return LogFormat::csv;
    return LogFormat::jsonl;
}

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line,
                                    const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline void load_jsonl_line(DatasetBuilder& b, const std::string& path, std::size_t lineno,
                            const std::string& line) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        parse_fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) parse_fail(path, lineno, "expected a JSON object");
    auto str_field = [&](const char* key, bool required) -> std::optional<std::string> {
        if (!obj.contains(key)) {
            if (required) parse_fail(path, lineno, std::string("missing field '") + key + "'");
            return std::nullopt;
        }
        if (!obj[key].is_string())
            parse_fail(path, lineno, std::string("field '") + key + "' must be a string");
        std::string v = obj[key].get<std::string>();
        if (v.empty() && required)
            parse_fail(path, lineno, std::string("field '") + key + "' is empty");
        return v;
    };
    std::string user = *str_field("user", true);
    std::string app = *str_field("app", true);
    std::string date = *str_field("date", true);
    Day day{};
    try {
        day = parse_day(date);
    } catch (const std::exception& e) {
        parse_fail(path, lineno, std::string("field 'date': ") + e.what());
    }
    b.add(user, app, day);
    if (auto cat = str_field("category", false); cat && !cat->empty()) b.set_category(app, *cat);
}

} // namespace detail

/// Parse a usage log into a Dataset. JSONL rows are objects with keys
/// "user", "app", "date" and optional "category"; CSV has a
/// `user,app,date[,category]` header. Errors name the file, line and field.
inline Dataset load_records(const std::string& path, LogFormat format,
                            std::optional<Day> window_start = std::nullopt,
                            std::optional<Day> window_end = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);

    DatasetBuilder b;
    std::string line;
    std::size_t lineno = 0;

    if (format == LogFormat::jsonl) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) detail::parse_fail(path, lineno, "empty line");
            detail::load_jsonl_line(b, path, lineno, line);
        }
    } else {
        if (!std::getline(in, line)) throw std::runtime_error("no records");
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto header = split_csv_line(line);
        bool has_category = false;
        if (header.size() == 4 && header[3] == "category")
            has_category = true;
        else if (header.size() != 3)
            detail::parse_fail(path, lineno, "expected header user,app,date[,category]");
        if (header[0] != "user" || header[1] != "app" || header[2] != "date")
            detail::parse_fail(path, lineno, "expected header user,app,date[,category]");

        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) detail::parse_fail(path, lineno, "empty line");
            auto cells = split_csv_line(line);
            if (cells.size() != header.size())
                detail::parse_fail(path, lineno,
                                   "expected " + std::to_string(header.size()) + " columns, got " +
                                       std::to_string(cells.size()));
            if (cells[0].empty()) detail::parse_fail(path, lineno, "field 'user' is empty");
            if (cells[1].empty()) detail::parse_fail(path, lineno, "field 'app' is empty");
            Day day{};
            try {
                day = parse_day(cells[2]);
            } catch (const std::exception& e) {
                detail::parse_fail(path, lineno, std::string("field 'date': ") + e.what());
            }
            b.add(cells[0], cells[1], day);
            if (has_category && !cells[3].empty()) {
                try {
                    b.set_category(cells[1], cells[3]);
                } catch (const std::exception& e) {
                    detail::parse_fail(path, lineno, e.what());
                }
            }
        }
    }

    return b.finish(window_start, window_end);
}

/// Per-app daily distinct-user counts, one entry per calendar day from the
/// app's first to last observed day inclusive. Days with no record hold 0
/// and are treated as missing downstream.
struct DailySeries {
    std::string app_id;
    Day first_day{};
    std::vector<std::int32_t> counts;

    Day day_at(std::size_t i) const { return first_day + static_cast<std::int32_t>(i); }
};

namespace detail {

inline DailySeries daily_usage_rows(std::span<const Dataset::Row> rows, std::string app_id,
                                    std::optional<Day> up_to = std::nullopt) {
    DailySeries out;
    out.app_id = std::move(app_id);
    std::size_t end = rows.size();
    if (up_to) {
        // per-app rows are day-sorted
        end = static_cast<std::size_t>(
            std::partition_point(rows.begin(), rows.end(),
                                 [&](const Dataset::Row& r) { return r.day <= *up_to; }) -
            rows.begin());
    }
    if (end == 0) throw std::invalid_argument("unknown app: " + out.app_id + " (no records in range)");
    out.first_day = rows.front().day;
    Day last = rows[end - 1].day;
    out.counts.assign(static_cast<std::size_t>(last - out.first_day) + 1, 0);
    // Rows are deduplicated, so one row is one distinct (user, day) pair.
    for (std::size_t i = 0; i < end; ++i)
        ++out.counts[static_cast<std::size_t>(rows[i].day - out.first_day)];
    return out;
}

} // namespace detail

inline DailySeries daily_usage(const Dataset& ds, std::string_view app) {
    std::uint32_t idx = ds.require_app(app);
    return detail::daily_usage_rows(ds.rows_for_app(idx), std::string(app));
}

/// Same series truncated to days <= up_to; used by the weekly protocol.
inline DailySeries daily_usage_up_to(const Dataset& ds, std::string_view app, Day up_to) {
    std::uint32_t idx = ds.require_app(app);
    return detail::daily_usage_rows(ds.rows_for_app(idx), std::string(app), up_to);
}

} // namespace apptrend
