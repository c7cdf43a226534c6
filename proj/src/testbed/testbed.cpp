#include "tamperscan/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tamperscan/assets.hpp"
#include "tamperscan/errors.hpp"
#include "tamperscan/form.hpp"
#include "tamperscan/html.hpp"
#include "tamperscan/url.hpp"

namespace tamperscan {

namespace {

const std::vector<std::string> kHsbcOwn{"SAVINGS~~004 556677001", "CURRENT~~004 556677118"};
const std::vector<std::string> kHsbcPayees{"FUND RECEIPIENT~~290 123456882", "UTILITY CO~~018 800200300"};
const std::vector<std::string> kBeaOwn{"012-345678-0", "012-345678-3"};
const std::vector<std::string> kBeaPayees{"001-234567-8", "001-765432-1"};
const std::vector<std::string> kBocOwn{"SAVINGS 009-11-220033", "CURRENT 009-11-220044"};
const std::vector<std::string> kBocPayees{"ELECTRIC 776-01-000123", "WATER 776-01-000456", "RENT 776-02-009900"};

// The ten days before the fixed reference date 2014-03-01.
const std::vector<std::string> kRecentDates{"2014-02-19", "2014-02-20", "2014-02-21", "2014-02-22", "2014-02-23",
                                            "2014-02-24", "2014-02-25", "2014-02-26", "2014-02-27", "2014-02-28"};

bool valid_amount(const std::string& amt) {
    static const std::regex re(R"(\d+(\.\d{1,2})?)");
    if (!std::regex_match(amt, re)) return false;
    double v = std::stod(amt);
    return v >= 1 && v <= 10000;
}

std::string display_amount(const std::string& amt) {
    double v = std::stod(amt);
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    std::string s = os.str();
    auto dot = s.find('.');
    for (int i = static_cast<int>(dot) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

bool valid_calendar_date(const std::string& text) {
    static const std::regex re(R"((\d{4})-(\d{1,2})-(\d{1,2}))");
    std::smatch m;
    if (!std::regex_match(text, m, re)) return false;
    int y = std::stoi(m[1]), mo = std::stoi(m[2]), d = std::stoi(m[3]);
    if (mo < 1 || mo > 12 || d < 1) return false;
    static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int limit = days[mo - 1] + (mo == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0) ? 1 : 0);
    return d <= limit;
}

// Strict decimal index into a table.
std::optional<std::size_t> table_index(const std::string& text, std::size_t size) {
    static const std::regex re("0|[1-9][0-9]{0,3}");
    if (!std::regex_match(text, re)) return std::nullopt;
    auto i = static_cast<std::size_t>(std::stoul(text));
    if (i >= size) return std::nullopt;
    return i;
}

bool contains(const std::vector<std::string>& list, const std::string& v) {
    return std::find(list.begin(), list.end(), v) != list.end();
}

std::string options_html(const std::vector<std::string>& values, const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += "<option value=\"" + escape_html(values[i]) + "\">" + escape_html(labels[i]) + "</option>";
    }
    return out;
}

std::vector<std::string> index_values(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

// {{KEY}} is replaced escaped, {{{KEY}}} raw.
std::string render(std::string_view name, const std::map<std::string, std::string>& vars,
                   const std::map<std::string, std::string>& raw = {}) {
    std::string out(asset(name));
    for (const auto& [k, v] : raw) {
        std::string key = "{{{" + k + "}}}";
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + v.size())) out.replace(pos, key.size(), v);
    }
    for (const auto& [k, v] : vars) {
        std::string key = "{{" + k + "}}";
        std::string esc = escape_html(v);
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + esc.size())) {
            out.replace(pos, key.size(), esc);
        }
    }
    return out;
}

std::map<std::string, std::string> cookies_of(const httplib::Request& req) {
    std::map<std::string, std::string> out;
    std::string header = req.get_header_value("Cookie");
    std::size_t pos = 0;
    while (pos < header.size()) {
        auto end = header.find(';', pos);
        if (end == std::string::npos) end = header.size();
        std::string pair = header.substr(pos, end - pos);
        pair.erase(0, pair.find_first_not_of(' '));
        if (auto eq = pair.find('='); eq != std::string::npos) out[pair.substr(0, eq)] = pair.substr(eq + 1);
        pos = end + 1;
    }
    return out;
}

std::map<std::string, std::string> query_of(const httplib::Request& req) {
    std::map<std::string, std::string> out;
    auto q = req.target.find('?');
    if (q == std::string::npos) return out;
    for (auto& [k, v] : form_decode(req.target.substr(q + 1))) out.emplace(std::move(k), std::move(v));
    return out;
}

std::map<std::string, std::string> body_of(const httplib::Request& req) {
    std::map<std::string, std::string> out;
    if (req.get_header_value("Content-Type").find("application/json") != std::string::npos) {
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (!j.is_object()) return out;
        for (const auto& [k, v] : j.items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
        return out;
    }
    for (auto& [k, v] : form_decode(req.body)) out.emplace(std::move(k), std::move(v));
    return out;
}

std::string field(const std::map<std::string, std::string>& m, const std::string& name) {
    auto it = m.find(name);
    return it == m.end() ? std::string() : it->second;
}

struct ServerSession {
    std::string id;
    std::map<std::string, bool> tokens;  // issued one-time token -> spent
    std::string sid;                     // session-scoped token (bea-like)
    bool pending = false;                // accepted step A awaiting confirmation
    std::string from, to, amt, mac;
};

struct Rejection {
    RejectCause cause;
    std::string detail;
};

}  // namespace

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::HsbcLike: return "hsbc-like";
        case Scenario::BeaLike: return "bea-like";
        case Scenario::BocLike: return "boc-like";
        case Scenario::AjaxDate: return "ajax-date";
    }
    return "hsbc-like";
}

Scenario scenario_from_string(std::string_view name) {
    for (auto s : all_scenarios()) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown scenario '" + std::string(name) + "' (expected hsbc-like, bea-like, boc-like or ajax-date)");
}

const std::vector<Scenario>& all_scenarios() {
    static const std::vector<Scenario> all{Scenario::HsbcLike, Scenario::BeaLike, Scenario::BocLike, Scenario::AjaxDate};
    return all;
}

std::string_view to_string(RejectCause c) {
    switch (c) {
        case RejectCause::TokenMissing: return "token-missing";
        case RejectCause::TokenSpent: return "token-spent";
        case RejectCause::DependencyMismatch: return "dependency-mismatch";
        case RejectCause::WorkflowOrder: return "workflow-order";
        case RejectCause::ValidationFail: return "validation-fail";
    }
    return "validation-fail";
}

RejectCause reject_cause_from_string(std::string_view text) {
    for (auto c : {RejectCause::TokenMissing, RejectCause::TokenSpent, RejectCause::DependencyMismatch,
                   RejectCause::WorkflowOrder, RejectCause::ValidationFail}) {
        if (to_string(c) == text) return c;
    }
    throw ParseError("unknown rejection cause '" + std::string(text) + "'");
}

GroundTruth ground_truth(Scenario s) {
    switch (s) {
        case Scenario::HsbcLike: return {{"TO"}};
        case Scenario::BeaLike: return {{"TO"}};
        case Scenario::BocLike: return {};
        case Scenario::AjaxDate: return {{"DATE"}};
    }
    return {};
}

std::string_view bundled_script(Scenario s) { return asset(std::string(to_string(s)) + ".json"); }

struct Testbed::Impl {
    TestbedConfig config;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;

    mutable std::mutex mu;
    std::mt19937_64 rng;
    std::map<std::string, ServerSession> sessions;
    std::vector<LogEntry> entries;
    std::vector<Transfer> done;
    int txn_counter = 0;

    explicit Impl(TestbedConfig c) : config(std::move(c)), rng(config.token_seed) {}

    std::string token(std::size_t n) {
        static constexpr std::string_view letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
        std::string out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(letters[rng() % letters.size()]);
        return out;
    }

    void record(const std::string& sess, const std::string& route, std::optional<Rejection> rej) {
        LogEntry e;
        e.seq = entries.size();
        e.session = sess;
        e.route = route;
        e.accepted = !rej;
        if (rej) {
            e.cause = rej->cause;
            e.detail = rej->detail;
        }
        entries.push_back(std::move(e));
    }

    // Existing session from the cookie, or a new one announced via Set-Cookie.
    ServerSession& session_for(const httplib::Request& req, httplib::Response& res) {
        auto cookies = cookies_of(req);
        if (auto it = cookies.find("SESSID"); it != cookies.end()) {
            if (auto s = sessions.find(it->second); s != sessions.end()) return s->second;
        }
        ServerSession s;
        s.id = token(16);
        s.sid = token(10);
        res.set_header("Set-Cookie", "SESSID=" + s.id + "; Path=/; HttpOnly");
        return sessions.emplace(s.id, s).first->second;
    }

    ServerSession* existing_session(const httplib::Request& req) {
        auto cookies = cookies_of(req);
        auto it = cookies.find("SESSID");
        if (it == cookies.end()) return nullptr;
        auto s = sessions.find(it->second);
        return s == sessions.end() ? nullptr : &s->second;
    }

    std::string issue(ServerSession& s) {
        std::string t = token(12);
        s.tokens[t] = false;
        return t;
    }

    // The one-time token gate: unknown/absent -> missing, reused -> spent. Spends on success.
    static std::optional<Rejection> spend(ServerSession& s, const std::string& name, const std::string& value) {
        if (value.empty()) return Rejection{RejectCause::TokenMissing, name + " absent"};
        auto it = s.tokens.find(value);
        if (it == s.tokens.end()) return Rejection{RejectCause::TokenMissing, name + " was not issued to this session"};
        if (it->second) return Rejection{RejectCause::TokenSpent, name + " already used"};
        it->second = true;
        return std::nullopt;
    }

    void reject_page(httplib::Response& res, const Rejection& r) {
        std::string reason;
        switch (r.cause) {
            case RejectCause::TokenMissing:
            case RejectCause::TokenSpent: reason = "Your request has expired. Please start the transfer again."; break;
            case RejectCause::DependencyMismatch: reason = "The transfer details are inconsistent."; break;
            case RejectCause::WorkflowOrder: reason = "Please start the transfer from the first page."; break;
            case RejectCause::ValidationFail: reason = "Some transfer details are invalid."; break;
        }
        res.status = 200;
        res.set_content(render("rejected.html", {{"REASON", reason}}), "text/html; charset=utf-8");
    }

    // ---- step A page -------------------------------------------------------

    void step_a(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        ServerSession& s = session_for(req, res);
        s.pending = false;
        std::string page;
        switch (config.scenario) {
            case Scenario::HsbcLike:
                page = render("hsbc_step_a.html", {{"CSRF1", issue(s)}, {"UITOKEN", token(8)}},
                              {{"FROM_OPTIONS", options_html(kHsbcOwn, kHsbcOwn)},
                               {"TO_OPTIONS", options_html(kHsbcPayees, kHsbcPayees)}});
                break;
            case Scenario::BeaLike:
                page = render("bea_step_a.html", {{"CSRF1", issue(s)}, {"SID", s.sid}},
                              {{"FROM_OPTIONS", options_html(kBeaOwn, kBeaOwn)},
                               {"TO_OPTIONS", options_html(kBeaPayees, kBeaPayees)}});
                break;
            case Scenario::BocLike:
                page = render("boc_step_a.html", {{"CSRF1", issue(s)}},
                              {{"FROM_OPTIONS", options_html(index_values(kBocOwn.size()), kBocOwn)},
                               {"TO_OPTIONS", options_html(index_values(kBocPayees.size()), kBocPayees)}});
                break;
            case Scenario::AjaxDate:
                page = render("ajax_page.html", {{"TOK", issue(s)}, {"DATE_PATTERN", join(kRecentDates, "|")}});
                break;
        }
        res.set_content(page, "text/html; charset=utf-8");
    }

    // ---- handler A ---------------------------------------------------------

    std::optional<Rejection> validate_a(ServerSession& s, const std::map<std::string, std::string>& f) {
        const std::string from = field(f, "FROM"), to = field(f, "TO"), amt = field(f, "AMT");
        switch (config.scenario) {
            case Scenario::HsbcLike: {
                // The account format is checked; authorization of TO is not.
                static const std::regex account(R"(^[a-zA-Z ]{1,20}~~\d{1,3} ?\d{1,12}$)");
                if (!contains(kHsbcOwn, from)) return Rejection{RejectCause::ValidationFail, "FROM"};
                if (!std::regex_match(to, account)) return Rejection{RejectCause::ValidationFail, "TO format"};
                if (!valid_amount(amt)) return Rejection{RejectCause::ValidationFail, "AMT"};
                const std::string branch = field(f, "BRANCH");
                if (branch != "registered" && branch != "unregistered") return Rejection{RejectCause::ValidationFail, "BRANCH"};
                if (branch == "unregistered" && field(f, "OTP") != "482913") {
                    return Rejection{RejectCause::ValidationFail, "OTP"};
                }
                break;
            }
            case Scenario::BeaLike: {
                static const std::regex account(R"(^\d{3}-\d{6}-\d$)");
                if (field(f, "SID") != s.sid) return Rejection{RejectCause::TokenMissing, "SID does not belong to this session"};
                if (!contains(kBeaOwn, from)) return Rejection{RejectCause::ValidationFail, "FROM"};
                if (!std::regex_match(to, account)) return Rejection{RejectCause::ValidationFail, "TO format"};
                if (!valid_amount(amt)) return Rejection{RejectCause::ValidationFail, "AMT"};
                if (field(f, "MACcode") != base64_encode(from + "|" + to + "|" + amt)) {
                    return Rejection{RejectCause::DependencyMismatch, "MACcode does not align with FROM/TO/AMT"};
                }
                break;
            }
            case Scenario::BocLike: {
                if (!table_index(from, kBocOwn.size())) return Rejection{RejectCause::ValidationFail, "FROM index"};
                if (!table_index(to, kBocPayees.size())) return Rejection{RejectCause::ValidationFail, "TO index"};
                if (!valid_amount(amt)) return Rejection{RejectCause::ValidationFail, "AMT"};
                break;
            }
            case Scenario::AjaxDate: break;
        }
        return std::nullopt;
    }

    void handler_a(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        ServerSession* s = existing_session(req);
        auto f = body_of(req);
        if (!s) {
            Rejection r{RejectCause::TokenMissing, "no session"};
            record("", "/review", r);
            return reject_page(res, r);
        }
        s->pending = false;
        if (auto r = spend(*s, "CSRF1", field(f, "CSRF1"))) {
            record(s->id, "/review", r);
            return reject_page(res, *r);
        }
        if (auto r = validate_a(*s, f)) {
            record(s->id, "/review", r);
            return reject_page(res, *r);
        }
        s->from = field(f, "FROM");
        s->to = field(f, "TO");
        s->amt = field(f, "AMT");
        s->pending = true;
        record(s->id, "/review", std::nullopt);

        std::string page;
        switch (config.scenario) {
            case Scenario::HsbcLike:
                page = render("hsbc_review.html", {{"FROM", s->from},
                                                   {"TO", s->to},
                                                   {"AMT", s->amt},
                                                   {"AMT_DISPLAY", display_amount(s->amt)},
                                                   {"CSRF2", issue(*s)}});
                break;
            case Scenario::BeaLike:
                s->mac = base64_encode(s->from + "|" + s->to + "|" + s->amt);
                page = render("bea_review.html", {{"FROM", s->from},
                                                  {"TO", s->to},
                                                  {"AMT_DISPLAY", display_amount(s->amt)},
                                                  {"MAC", s->mac},
                                                  {"SID", s->sid},
                                                  {"CSRF2", issue(*s)}});
                break;
            case Scenario::BocLike:
                page = render("boc_review.html", {{"FROM", kBocOwn[std::stoul(s->from)]},
                                                  {"TO", kBocPayees[std::stoul(s->to)]},
                                                  {"TO_INDEX", s->to},
                                                  {"AMT_DISPLAY", display_amount(s->amt)},
                                                  {"CSRF2", issue(*s)}});
                break;
            case Scenario::AjaxDate: break;
        }
        res.set_content(page, "text/html; charset=utf-8");
    }

    // ---- handler B ---------------------------------------------------------

    void handler_b(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        ServerSession* s = existing_session(req);
        auto f = body_of(req);
        auto fail = [&](const Rejection& r) {
            record(s ? s->id : "", "/confirm", r);
            reject_page(res, r);
        };
        if (!s || !s->pending) return fail({RejectCause::WorkflowOrder, "no accepted step A in this session"});
        if (auto r = spend(*s, "CSRF2", field(f, "CSRF2"))) return fail(*r);
        switch (config.scenario) {
            case Scenario::HsbcLike:
            case Scenario::BocLike:
                if (field(f, "TO") != s->to) return fail({RejectCause::DependencyMismatch, "TO must match sess.TO"});
                break;
            case Scenario::BeaLike:
                if (field(f, "SID") != s->sid) return fail({RejectCause::TokenMissing, "SID does not belong to this session"});
                if (field(f, "MACcode") != s->mac) return fail({RejectCause::DependencyMismatch, "MACcode does not match"});
                break;
            case Scenario::AjaxDate: break;
        }
        s->pending = false;
        record(s->id, "/confirm", std::nullopt);

        // Transfer values come from the session; AMT sent with step B is ignored.
        Transfer t;
        t.session = s->id;
        t.from = s->from;
        t.to = s->to;
        t.amount = s->amt;
        std::ostringstream txn;
        txn << "TX" << std::setw(6) << std::setfill('0') << ++txn_counter;
        t.txn = txn.str();
        std::string from = s->from, to = s->to;
        if (config.scenario == Scenario::BocLike) {
            from = kBocOwn[std::stoul(s->from)];
            to = kBocPayees[std::stoul(s->to)];
        }
        done.push_back(t);
        res.set_content(render("acknowledgment.html", {{"TXN", t.txn}, {"FROM", from}, {"TO", to},
                                                       {"AMT_DISPLAY", display_amount(s->amt)}}),
                        "text/html; charset=utf-8");
    }

    // ---- AJAX endpoint -----------------------------------------------------

    void ajax_query(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        ServerSession* s = existing_session(req);
        auto f = body_of(req);
        auto q = query_of(req);
        auto fail = [&](const Rejection& r, const std::string& message) {
            record(s ? s->id : "", "/api/query", r);
            nlohmann::ordered_json body{{"success", 0}, {"message", "Request failed: " + message}};
            res.set_content(body.dump(), "application/json");
        };
        if (!s) return fail({RejectCause::TokenMissing, "no session"}, "session expired");
        if (auto r = spend(*s, "tok", field(q, "tok"))) return fail(*r, "session expired");

        static const std::regex flight(R"([A-Z]{2}\d{3,4})");
        const std::string fl = field(f, "FLIGHT"), date = field(f, "DATE");
        if (!std::regex_match(fl, flight)) return fail({RejectCause::ValidationFail, "FLIGHT"}, "unknown flight");
        // The ten-day window is enforced only by the page.
        if (!valid_calendar_date(date)) return fail({RejectCause::ValidationFail, "DATE"}, "invalid date");
        record(s->id, "/api/query", std::nullopt);

        unsigned digits = 0;
        for (char c : fl + date) digits += static_cast<unsigned char>(c);
        nlohmann::ordered_json body{{"success", 1},
                                    {"message", "Query completed"},
                                    {"flight", fl},
                                    {"date", date},
                                    {"on_time_pct", std::to_string(70 + digits % 30) + "%"}};
        res.set_content(body.dump(), "application/json");
    }

    // ---- debug endpoints ---------------------------------------------------

    void routes() {
        server.Get("/stepA", [this](const httplib::Request& req, httplib::Response& res) { step_a(req, res); });
        if (config.scenario == Scenario::AjaxDate) {
            server.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) { ajax_query(req, res); });
        } else {
            server.Post("/review", [this](const httplib::Request& req, httplib::Response& res) { handler_a(req, res); });
            server.Post("/confirm", [this](const httplib::Request& req, httplib::Response& res) { handler_b(req, res); });
        }
        server.Get("/_log", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t since = req.has_param("since") ? std::stoul(req.get_param_value("since")) : 0;
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& e : outer_log(since)) {
                out.push_back({{"seq", e.seq},
                               {"session", e.session},
                               {"route", e.route},
                               {"accepted", e.accepted},
                               {"cause", e.cause ? nlohmann::ordered_json(std::string(to_string(*e.cause))) : nullptr},
                               {"detail", e.detail}});
            }
            res.set_content(out.dump(), "application/json");
        });
        server.Get("/_transfers", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            std::lock_guard lock(mu);
            for (const auto& t : done) {
                out.push_back({{"session", t.session}, {"from", t.from}, {"to", t.to}, {"amount", t.amount}, {"txn", t.txn}});
            }
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/_reset", [this](const httplib::Request&, httplib::Response& res) {
            clear();
            res.set_content(R"({"reset":true})", "application/json");
        });
        server.Get("/_echo", [](const httplib::Request& req, httplib::Response& res) {
            if (req.has_param("set")) res.set_header("Set-Cookie", req.get_param_value("set") + "; Path=/");
            nlohmann::ordered_json out{{"cookie", req.get_header_value("Cookie")}, {"method", req.method}};
            res.set_content(out.dump(), "application/json");
        });
        server.Post("/_echo", [](const httplib::Request& req, httplib::Response& res) {
            nlohmann::ordered_json out{{"cookie", req.get_header_value("Cookie")},
                                       {"method", req.method},
                                       {"content_type", req.get_header_value("Content-Type")},
                                       {"body", req.body}};
            res.set_content(out.dump(), "application/json");
        });
        auto redirect = [](const httplib::Request& req, httplib::Response& res) {
            int code = req.has_param("code") ? std::stoi(req.get_param_value("code")) : 302;
            int hops = req.has_param("hops") ? std::stoi(req.get_param_value("hops")) : 0;
            std::string to = req.has_param("to") ? req.get_param_value("to") : "/_echo";
            if (hops > 0) {
                to = "/_redirect?hops=" + std::to_string(hops - 1) + "&code=" + std::to_string(code) + "&to=" +
                     percent_encode(to, false);
            }
            res.set_redirect(to, code);
        };
        server.Get("/_redirect", redirect);
        server.Post("/_redirect", redirect);
    }

    std::vector<LogEntry> outer_log(std::size_t since) const {
        std::lock_guard lock(mu);
        if (since >= entries.size()) return {};
        return {entries.begin() + static_cast<std::ptrdiff_t>(since), entries.end()};
    }

    void clear() {
        std::lock_guard lock(mu);
        sessions.clear();
        entries.clear();
        done.clear();
        txn_counter = 0;
        rng.seed(config.token_seed);
    }
};

Testbed::Testbed(TestbedConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    impl_->server.set_tcp_nodelay(true);
    impl_->server.set_keep_alive_timeout(1);
    impl_->routes();
}

Testbed::~Testbed() { stop(); }

void Testbed::start() {
    auto& i = *impl_;
    if (i.thread.joinable()) return;
    if (i.config.port == 0) {
        i.bound_port = i.server.bind_to_any_port(i.config.host);
        if (i.bound_port <= 0) throw ConfigError("cannot bind an ephemeral port on " + i.config.host);
    } else {
        if (!i.server.bind_to_port(i.config.host, i.config.port)) {
            throw ConfigError("cannot bind " + i.config.host + ":" + std::to_string(i.config.port));
        }
        i.bound_port = i.config.port;
    }
    i.thread = std::thread([&i] { i.server.listen_after_bind(); });
    i.server.wait_until_ready();
    spdlog::debug("test bed {} listening on {}", to_string(i.config.scenario), base_url());
}

void Testbed::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void Testbed::wait() {
    if (impl_->thread.joinable()) impl_->thread.join();
}

int Testbed::port() const { return impl_->bound_port; }

std::string Testbed::base_url() const { return "http://" + impl_->config.host + ":" + std::to_string(impl_->bound_port); }

Scenario Testbed::scenario() const { return impl_->config.scenario; }

std::vector<LogEntry> Testbed::log(std::size_t since) const { return impl_->outer_log(since); }

std::size_t Testbed::log_size() const {
    std::lock_guard lock(impl_->mu);
    return impl_->entries.size();
}

std::vector<Transfer> Testbed::transfers() const {
    std::lock_guard lock(impl_->mu);
    return impl_->done;
}

void Testbed::reset() { impl_->clear(); }

}  // namespace tamperscan
