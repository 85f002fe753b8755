#include "doctest.h"

#include "bsr/restoration/frequency.hpp"

using namespace bsr::network;
using namespace bsr::restoration;

namespace {

DerUnit unit() {
    DerUnit u;
    u.id = "G";
    u.kind = DerKind::GfmBess;
    u.s_rat = 100.0;
    u.d = 20.0;
    u.k_f = 30.0;
    u.h = 5.0;
    u.gamma = 0.3;
    return u;
}

}  // namespace

TEST_SUITE("frequency") {

TEST_CASE("droop frequency against hand values") {
    // 50 kW over 100 kVA * 50 = 0.01 -> 59.4 Hz
    CHECK(compute_qss_frequency(unit(), 50.0, 0.0, false) == doctest::Approx(59.4));
    CHECK(compute_qss_frequency(unit(), 0.0, 0.0, false) == doctest::Approx(60.0));
    CHECK(compute_qss_frequency(unit(), 50.0, 0.2, true) == doctest::Approx(59.6));
    CHECK(compute_qss_frequency(unit(), 50.0, 0.2, false) == doctest::Approx(59.4));
}

TEST_CASE("step response against hand values") {
    CHECK(compute_qss_deviation(unit(), 25.0) == doctest::Approx(0.3));
    const auto r = compute_rocof_and_nadir(unit(), 25.0);
    CHECK(r.rocof == doctest::Approx(1.5));   // 60 * 25 / (2 * 100 * 5)
    CHECK(r.nadir == doctest::Approx(0.39));  // 0.3 * 1.3
    const auto neg = compute_rocof_and_nadir(unit(), -25.0);
    CHECK(neg.rocof == doctest::Approx(-1.5));
    CHECK(neg.nadir == doctest::Approx(-0.39));
}

TEST_CASE("responses are linear in the step") {
    for (double dp : {1.0, 7.5, 33.0}) {
        CHECK(compute_qss_deviation(unit(), 2 * dp) == doctest::Approx(2 * compute_qss_deviation(unit(), dp)));
        CHECK(compute_rocof_and_nadir(unit(), 3 * dp).rocof ==
              doctest::Approx(3 * compute_rocof_and_nadir(unit(), dp).rocof));
    }
}

TEST_CASE("non grid-forming units and bad bounds are rejected") {
    DerUnit pv = unit();
    pv.kind = DerKind::GflPv;
    CHECK_THROWS(compute_qss_deviation(pv, 1.0));
    FrequencyBounds b;
    CHECK_NOTHROW(b.validate());
    b.rocof = 0.0;
    CHECK_THROWS(b.validate());
}

}
