#include "metaplan/plan.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "metaplan/errors.hpp"
#include "metaplan/world.hpp"

namespace metaplan {

namespace {

struct LineScanner {
    const std::string& text;
    int line_no;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    int column() const { return static_cast<int>(pos) + 1; }

    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }

    bool peek_is(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    void expect(char c, const std::string& what) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c) throw ParseError(line_no, column(), what);
        ++pos;
    }

    /// Next bare token: identifier, verb, or '->'.
    std::string token(const std::string& what) {
        skip_ws();
        if (pos >= text.size()) throw ParseError(line_no, column(), what);
        if (text.compare(pos, 2, "->") == 0) {
            pos += 2;
            return "->";
        }
        std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != ':' && text[pos] != ',' && text[pos] != '(' && text[pos] != ')') {
            if (text.compare(pos, 2, "->") == 0) break;
            ++pos;
        }
        if (pos == start) throw ParseError(line_no, column(), what);
        return text.substr(start, pos - start);
    }

    double number(const std::string& what) {
        skip_ws();
        const char* begin = text.data() + pos;
        const char* end = text.data() + text.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{} || ptr == begin) throw ParseError(line_no, column(), what);
        pos += static_cast<std::size_t>(ptr - begin);
        return value;
    }
};

Pose parse_pose(LineScanner& s) {
    s.expect('(', "'('");
    Pose p;
    p.x = s.number("number");
    s.expect(',', "','");
    p.y = s.number("number");
    s.expect(',', "','");
    p.z = s.number("number");
    if (s.peek_is(',')) {
        s.expect(',', "','");
        p.yaw = normalize_yaw(s.number("number"));
    }
    s.expect(')', "')'");
    return p;
}

Action parse_action(LineScanner& s) {
    std::string verb = s.token("action verb");
    if (verb == "PICK") {
        PickAction a;
        a.object_id = s.token("object id");
        if (!s.at_end() && !s.peek_is('-')) {
            // Optional HANDLE/OFFSET clause; anything else belongs to the next action.
            std::size_t save = s.pos;
            std::string next = s.token("grasp spec");
            if (next == "HANDLE") {
                a.grasp = GraspByHandle{s.token("handle id")};
            } else if (next == "OFFSET") {
                a.grasp = GraspByOffset{s.number("offset in meters")};
            } else {
                s.pos = save;
            }
        }
        return a;
    }
    if (verb == "PLACE") {
        PlaceAction a;
        a.object_id = s.token("object id");
        std::string kw = s.token("'AT'");
        if (kw != "AT") throw ParseError(s.line_no, s.column(), "'AT'");
        a.at = parse_pose(s);
        return a;
    }
    if (verb == "MOVE") {
        std::string kw = s.token("'TO'");
        if (kw != "TO") throw ParseError(s.line_no, s.column(), "'TO'");
        return MoveAction{parse_pose(s)};
    }
    if (verb == "TWIST") {
        double deg = s.number("degrees");
        if (deg < -180.0 || deg > 180.0)
            throw ParseError(s.line_no, s.column(), "TWIST degrees in [-180, 180]");
        return TwistAction{deg};
    }
    if (verb == "OPEN") return OpenAction{};
    if (verb == "CLOSE") return CloseAction{};
    if (verb == "WAIT") return WaitAction{};
    throw UnknownVerb(verb, s.line_no);
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to the shortest representation that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[64];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(shorter, "%lf", &back);
        if (back == v) return shorter;
    }
    return buf;
}

std::string format_pose(const Pose& p) {
    std::string out = "(" + format_number(p.x) + "," + format_number(p.y) + "," + format_number(p.z);
    if (p.yaw != 0.0) out += "," + format_number(p.yaw);
    return out + ")";
}

}  // namespace

JointPlan parse_plan(const std::string& text) {
    JointPlan plan;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool saw_plan_line = false;
    while (std::getline(in, line)) {
        ++line_no;
        LineScanner s{line, line_no};
        if (s.at_end()) continue;
        std::string head = s.token("line");
        // Lenient mode: chat models add commentary around the plan. Only
        // lines starting with the PLAN keyword are parsed.
        if (head != "PLAN") continue;
        saw_plan_line = true;
        std::string agent = s.token("agent id");
        s.expect(':', "':'");
        AgentPlan agent_plan;
        agent_plan.agent_id = agent;
        agent_plan.actions.push_back(parse_action(s));
        while (!s.at_end()) {
            std::string arrow = s.token("'->'");
            if (arrow != "->") throw ParseError(s.line_no, s.column(), "'->'");
            agent_plan.actions.push_back(parse_action(s));
        }
        if (plan.plans.contains(agent)) throw DuplicateAgent(agent);
        plan.plans.emplace(agent, std::move(agent_plan));
    }
    if (!saw_plan_line) throw ParseError(line_no == 0 ? 1 : line_no, 1, "at least one PLAN line");

    // Pad shorter plans with WAIT so all agents are step-aligned.
    const std::size_t max_len = plan.length();
    for (auto& [_, p] : plan.plans) {
        while (p.actions.size() < max_len) p.actions.push_back(WaitAction{});
    }
    return plan;
}

std::string serialize_action(const Action& action) {
    struct Visitor {
        std::string operator()(const PickAction& a) const {
            std::string out = "PICK " + a.object_id;
            if (const auto* h = std::get_if<GraspByHandle>(&a.grasp)) {
                out += " HANDLE " + h->handle_id;
            } else {
                const auto& o = std::get<GraspByOffset>(a.grasp);
                if (o.offset != 0.0) out += " OFFSET " + format_number(o.offset);
            }
            return out;
        }
        std::string operator()(const PlaceAction& a) const {
            return "PLACE " + a.object_id + " AT " + format_pose(a.at);
        }
        std::string operator()(const MoveAction& a) const { return "MOVE TO " + format_pose(a.to); }
        std::string operator()(const TwistAction& a) const {
            return "TWIST " + format_number(a.degrees);
        }
        std::string operator()(const OpenAction&) const { return "OPEN"; }
        std::string operator()(const CloseAction&) const { return "CLOSE"; }
        std::string operator()(const WaitAction&) const { return "WAIT"; }
    };
    return std::visit(Visitor{}, action);
}

std::string serialize_plan(const JointPlan& plan) {
    if (plan.plans.empty())
        throw std::invalid_argument("serialize_plan: refusing to serialize an empty joint plan");
    const std::size_t max_len = plan.length();
    std::string out;
    for (const auto& [agent, agent_plan] : plan.plans) {
        out += "PLAN " + agent + ": ";
        for (std::size_t i = 0; i < max_len; ++i) {
            if (i > 0) out += " -> ";
            if (i < agent_plan.actions.size()) {
                out += serialize_action(agent_plan.actions[i]);
            } else {
                out += "WAIT";  // explicit padding
            }
        }
        out += "\n";
    }
    return out;
}

// -- Prompt assembly ---------------------------------------------------------

namespace {

std::string format3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

std::string render_observation(const Observation& o) {
    std::string out;
    if (o.visible_objects.empty()) {
        out += "no visible objects\n";
    } else {
        for (const auto& vo : o.visible_objects) {
            out += vo.object_id + " " + to_string(vo.kind) + " at (" + format3(vo.pose.x) + "," +
                   format3(vo.pose.y) + "," + format3(vo.pose.z) + "," + format3(vo.pose.yaw) +
                   ")\n";
        }
    }
    out += "own arm joints (" + format3(o.own_arm.joints[0]) + "," + format3(o.own_arm.joints[1]) +
           "," + format3(o.own_arm.joints[2]) + ") gripper " +
           (o.own_arm.gripper == Gripper::Closed ? "closed" : "open");
    if (o.own_arm.held) {
        out += " holding " + o.own_arm.held->object_id + " at offset " +
               format3(o.own_arm.held->offset);
    }
    out += "\n";
    return out;
}

std::string grammar_reminder() {
    return "Respond only with PLAN lines, one per agent:\n"
           "  PLAN <agent>: <action> -> <action> -> ...\n"
           "Actions:\n"
           "  PICK <object> [HANDLE <handle> | OFFSET <meters>]\n"
           "  PLACE <object> AT (x,y,z[,yaw])\n"
           "  MOVE TO (x,y,z[,yaw])\n"
           "  TWIST <degrees>\n"
           "  OPEN | CLOSE | WAIT\n"
           "Action k of every agent executes in the same environment step.\n";
}

PromptBundle render_prompt(const std::string& agent_id, const std::string& goal,
                           const Observation& o, const std::string& meta_text) {
    PromptBundle bundle;
    bundle.agent_id = agent_id;
    bundle.sections.push_back({"GOAL", goal});
    bundle.sections.push_back({"OBSERVATION", render_observation(o)});
    bundle.sections.push_back({"META", meta_text});
    bundle.sections.push_back({"FORMAT", grammar_reminder()});
    for (const auto& s : bundle.sections) {
        bundle.rendered += s.label + "\n" + s.text;
        if (!s.text.empty() && s.text.back() != '\n') bundle.rendered += '\n';
        bundle.rendered += '\n';
    }
    return bundle;
}

}  // namespace metaplan
