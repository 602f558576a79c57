#include "difflab/classify.hpp"

#include <cmath>

#include "difflab/errors.hpp"

namespace difflab {

const char* to_string(Kind kind) noexcept {
    switch (kind) {
        case Kind::Regular: return "regular";
        case Kind::Exit: return "exit";
        case Kind::Entrance: return "entrance";
        case Kind::Natural: return "natural";
        case Kind::Inconclusive: return "inconclusive";
    }
    return "";
}

const char* to_string(RegularSubtype subtype) noexcept {
    switch (subtype) {
        case RegularSubtype::Absorbing: return "absorbing";
        case RegularSubtype::SlowlyReflecting: return "slowly_reflecting";
        case RegularSubtype::InstantaneouslyReflecting: return "instantaneously_reflecting";
    }
    return "";
}

const char* to_string(Answer answer) noexcept {
    switch (answer) {
        case Answer::Yes: return "yes";
        case Answer::No: return "no";
        case Answer::Inconclusive: return "inconclusive";
    }
    return "";
}

Kind kind_from(const quad::Verdict& u, const quad::Verdict& v) noexcept {
    if (u.inconclusive() || v.inconclusive()) return Kind::Inconclusive;
    if (u.finite()) return v.finite() ? Kind::Regular : Kind::Exit;
    return v.finite() ? Kind::Entrance : Kind::Natural;
}

RegularSubtype subtype_from(const AtomMass& atom) noexcept {
    if (atom.is_infinite()) return RegularSubtype::Absorbing;
    return atom.value() > 0.0 ? RegularSubtype::SlowlyReflecting : RegularSubtype::InstantaneouslyReflecting;
}

namespace {

quad::Verdict guarded(const quad::Integrand& f, double c, double end, const quad::Tolerance& tol) {
    try {
        return quad::integrate_improper(f, c, end, tol);
    } catch (const NegativeIntegrand&) {
        throw;
    } catch (const Error& e) {
        quad::Verdict v;
        v.reason = e.what();
        return v;
    }
}

}  // namespace

quad::Verdict u_integral(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol) {
    const double c = ss.scale.reference_point();
    const double end = ss.scale.domain().end(side);
    if (side == Side::Right)
        return guarded([&](double z) { return ss.speed.interior_mass(c, z) * ss.scale.derivative(z); }, c, end, tol);
    return guarded([&](double z) { return ss.speed.interior_mass(z, c) * ss.scale.derivative(z); }, c, end, tol);
}

quad::Verdict v_integral(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol) {
    const double c = ss.scale.reference_point();
    const double end = ss.scale.domain().end(side);
    const double sign = side == Side::Right ? 1.0 : -1.0;
    return guarded(
        [&](double y) { return sign * ss.scale.gap_ratio(y) * ss.speed.density_times_derivative(y); }, c, end, tol);
}

BoundaryClass classify_boundary(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol) {
    BoundaryClass bc;
    bc.side = side;
    bc.endpoint = ss.scale.domain().end(side);
    bc.u = u_integral(ss, side, tol);
    bc.v = v_integral(ss, side, tol);
    bc.kind = kind_from(bc.u, bc.v);
    bc.atom = ss.speed.atom(side);
    if (bc.kind == Kind::Regular) {
        if (!bc.atom) bc.atom_defaulted = true;
        bc.subtype = bc.atom ? subtype_from(*bc.atom) : RegularSubtype::Absorbing;
    }
    return bc;
}

BoundaryClass classify_boundary(const DiffusionSpec& spec, Side side, const ClassifyOptions& options) {
    return classify_boundary(build_scale_speed(spec, options.reference_point, options.scale), side, options.tol);
}

PropertyVerdict decide_properties(const BoundaryClass& left, const BoundaryClass& right) {
    PropertyVerdict pv;
    bool entrance = false, unknown = false;
    for (const BoundaryClass* b : {&left, &right}) {
        const std::string where = std::string(to_string(b->side)) + " boundary";
        switch (b->kind) {
            case Kind::Entrance:
                entrance = true;
                pv.rationale.push_back(where + " is entrance: an open boundary that is not natural");
                break;
            case Kind::Natural:
                pv.rationale.push_back(where + " is natural");
                break;
            case Kind::Regular:
            case Kind::Exit:
                pv.rationale.push_back(where + " is " + to_string(b->kind) + ", hence closed");
                break;
            case Kind::Inconclusive:
                unknown = true;
                pv.rationale.push_back(where + " could not be classified (u: " + to_string(b->u.outcome) +
                                       ", v: " + to_string(b->v.outcome) + "); try tighter tolerances");
                break;
        }
    }
    const Answer a = entrance ? Answer::No : unknown ? Answer::Inconclusive : Answer::Yes;
    pv.fd = a;
    pv.martingale = a;
    return pv;
}

namespace {

bool same_model(const DiffusionSpec& a, const DiffusionSpec& b) {
    if (!a.is_ito() || !b.is_ito()) return false;
    const auto& ca = a.ito().coefficients;
    const auto& cb = b.ito().coefficients;
    if (!(ca.drift.ast() == cb.drift.ast()) || !(ca.diffusion.ast() == cb.diffusion.ast())) return false;
    if (!(ca.domain == cb.domain)) return false;
    for (Side side : {Side::Left, Side::Right})
        if (atom_on(a.atoms(), side) != atom_on(b.atoms(), side)) return false;
    return true;
}

}  // namespace

AnalysisReport analyze(const DiffusionSpec& spec, const ClassifyOptions& options) {
    const ScaleSpeed ss = build_scale_speed(spec, options.reference_point, options.scale);
    AnalysisReport r;
    r.model = spec.label();
    r.domain = spec.domain();
    r.reference_point = ss.scale.reference_point();
    r.grid_size = ss.scale.grid_size();
    r.tol = options.tol;
    r.left = classify_boundary(ss, Side::Left, options.tol);
    r.right = classify_boundary(ss, Side::Right, options.tol);
    r.properties = decide_properties(r.left, r.right);

    for (const BoundaryClass* b : {&r.left, &r.right}) {
        const std::string where = std::string(to_string(b->side)) + " boundary";
        if (b->atom_defaulted)
            r.diagnostics.push_back("warning: " + where + " is regular but no atom was given; treated as absorbing");
        if (b->atom && b->kind != Kind::Regular && b->kind != Kind::Inconclusive)
            r.diagnostics.push_back("warning: atom on " + where + " ignored: boundary is " + to_string(b->kind));
        const bool declared_closed = r.domain.closed(b->side);
        if (declared_closed && (b->kind == Kind::Entrance || b->kind == Kind::Natural))
            r.diagnostics.push_back("warning: " + where + " declared closed but classified " + to_string(b->kind));
        if (!declared_closed && b->kind == Kind::Regular && b->atom)
            r.diagnostics.push_back("note: " + where + " declared open but classified regular");
        for (const quad::Verdict* v : {&b->u, &b->v})
            if (v->inconclusive() && !v->reason.empty())
                r.diagnostics.push_back(where + ": " + (v == &b->u ? "u" : "v") + " integral: " + v->reason);
    }
    r.diagnostics.push_back("interior speed measure restricted to densities; atoms only at boundaries");

    for (const auto& entry : catalog())
        if (same_model(spec, entry.spec)) r.catalog_matches.push_back(entry.name);
    return r;
}

}  // namespace difflab
