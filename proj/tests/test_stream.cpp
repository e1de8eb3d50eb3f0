#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <thread>

#include "fbgforce/conversion.hpp"
#include "fbgforce/sensor_sim.hpp"
#include "fbgforce/stream.hpp"

using namespace fbg;
using namespace std::chrono_literals;

namespace {

std::vector<WavelengthSample> make_samples(std::size_t count, double rate_hz) {
    SyntheticSensorConfig cfg{QuadCalib(144.99, 527.62, -91.42, 4.69),
                              TempCharacterization::from_sensitivities(24.29, 10.31),
                              Baseline{1540000.0, 1550000.0},
                              25.0, 0.0, 3.0, rate_hz, 99};
    ForwardSensor sensor(cfg);
    std::vector<WavelengthSample> samples;
    samples.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) / rate_hz;
        samples.push_back(sensor.sample(t, 0.5 + 0.4 * std::sin(t), 25.0));
    }
    return samples;
}

} // namespace

TEST_CASE("replay stream delivers the trace bit-identically") {
    const auto samples = make_samples(2000, 1000.0);
    StreamServer server(samples, {0, 5000.0, {"fbg1", "fbg2"}});  // fast but paced
    StreamSubscriber sub("127.0.0.1", server.port());
    CHECK(sub.schema_version() == kStreamSchemaVersion);
    REQUIRE(sub.channels() == std::vector<std::string>{"fbg1", "fbg2"});

    server.begin_streaming();
    std::vector<WavelengthSample> received;
    while (auto s = sub.next()) received.push_back(*s);
    server.stop();

    REQUIRE(received.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        REQUIRE(received[i].t == samples[i].t);
        REQUIRE(received[i].lambda1_pm == samples[i].lambda1_pm);
        REQUIRE(received[i].lambda2_pm == samples[i].lambda2_pm);
    }
}

TEST_CASE("two subscribers receive identical frame sequences") {
    const auto samples = make_samples(500, 1000.0);
    StreamServer server(samples, {0, 1e9, {"fbg1", "fbg2"}});
    StreamSubscriber a("127.0.0.1", server.port());
    StreamSubscriber b("127.0.0.1", server.port());
    REQUIRE(server.wait_for_subscribers(2, 2000ms));
    server.begin_streaming();

    std::vector<WavelengthSample> ra, rb;
    std::thread ta([&] { while (auto s = a.next()) ra.push_back(*s); });
    std::thread tb([&] { while (auto s = b.next()) rb.push_back(*s); });
    ta.join();
    tb.join();
    server.stop();

    REQUIRE(ra.size() == samples.size());
    REQUIRE(rb.size() == samples.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        REQUIRE(ra[i].t == rb[i].t);
        REQUIRE(ra[i].lambda1_pm == rb[i].lambda1_pm);
    }
}

TEST_CASE("pacing holds the nominal rate") {
    const auto samples = make_samples(150, 100.0);
    StreamServer server(samples, {0, 100.0, {"fbg1", "fbg2"}});
    StreamSubscriber sub("127.0.0.1", server.port());
    server.begin_streaming();

    const auto start = std::chrono::steady_clock::now();
    std::size_t within_first_second = 0;
    double first_t = -1.0;
    while (auto s = sub.next()) {
        if (first_t < 0.0) first_t = s->t;
        if (s->t < first_t + 1.0) ++within_first_second;
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    server.stop();

    // 100 frames per schedule second, wall clock within sane bounds
    CHECK(within_first_second == 100);
    const double wall = std::chrono::duration<double>(elapsed).count();
    CHECK(wall > 1.0);
    CHECK(wall < 3.5);
}

TEST_CASE("a stalled subscriber is disconnected without hurting the rest") {
    const auto samples = make_samples(10000, 1000.0);
    StreamServer server(samples, {0, 5000.0, {"fbg1", "fbg2"}});

    StreamSubscriber stalled("127.0.0.1", server.port());
    StreamSubscriber active("127.0.0.1", server.port());
    REQUIRE(server.wait_for_subscribers(2, 2000ms));
    server.begin_streaming();

    std::vector<WavelengthSample> received;
    while (auto s = active.next()) received.push_back(*s);
    CHECK(received.size() == samples.size());

    // the stalled consumer was cut loose mid-stream: it sees whatever was
    // buffered, then EOF, well short of the full trace
    std::size_t stalled_count = 0;
    while (auto s = stalled.next()) ++stalled_count;
    CHECK(stalled_count < samples.size());
    server.stop();
}

TEST_CASE("streamed conversion equals offline conversion sample for sample") {
    const auto samples = make_samples(3000, 1000.0);
    const Baseline base{1540000.0, 1550000.0};
    const QuadCalib calib(144.99, 527.62, -91.42, 4.69);
    const auto temp = TempCharacterization::from_sensitivities(24.29, 10.31);

    std::vector<double> offline;
    for (const auto& s : samples)
        offline.push_back(compensated_force(s, base, calib, temp, true).force_n);

    StreamServer server(samples, {0, 5000.0, {"fbg1", "fbg2"}});
    StreamSubscriber sub("127.0.0.1", server.port());
    server.begin_streaming();
    std::vector<double> streamed;
    while (auto s = sub.next())
        streamed.push_back(compensated_force(*s, base, calib, temp, true).force_n);
    server.stop();

    REQUIRE(streamed.size() == offline.size());
    for (std::size_t i = 0; i < streamed.size(); ++i) REQUIRE(streamed[i] == offline[i]);
}

TEST_CASE("bind errors and connect errors are reported") {
    const auto samples = make_samples(10, 1000.0);
    StreamServer first(samples, {0, 1000.0, {"fbg1", "fbg2"}});
    CHECK_THROWS_AS(StreamServer(samples, {first.port(), 1000.0, {"fbg1", "fbg2"}}), BindError);
    CHECK_THROWS_AS(StreamSubscriber("127.0.0.1", 1), ConnectError);
}

TEST_CASE("protocol violations are named") {
    SECTION("malformed frame") {
        // hand-rolled fake service: good handshake, then a bad frame
        int listener = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(listener >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        REQUIRE(::listen(listener, 1) == 0);
        socklen_t len = sizeof(addr);
        ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);

        std::thread fake([&] {
            int fd = ::accept(listener, nullptr, nullptr);
            const std::string payload =
                "FBGSTREAM/1 channels=fbg1,fbg2 rate_hz=1000\n"
                "0.001 1540000 1550000\n"
                "0.002 oops 1550000\n";
            detail_net::send_all(fd, payload.data(), payload.size());
            ::close(fd);
        });

        StreamSubscriber sub("127.0.0.1", ntohs(addr.sin_port));
        CHECK(sub.next().has_value());
        try {
            sub.next();
            FAIL("expected ProtocolError");
        } catch (const ProtocolError& e) {
            CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
            CHECK(std::string(e.what()).find("oops") != std::string::npos);
        }
        fake.join();
        ::close(listener);
    }

    SECTION("schema version mismatch is a hard error") {
        int listener = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(listener >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        REQUIRE(::listen(listener, 1) == 0);
        socklen_t len = sizeof(addr);
        ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);

        std::thread fake([&] {
            int fd = ::accept(listener, nullptr, nullptr);
            const std::string payload = "FBGSTREAM/2 channels=fbg1,fbg2 rate_hz=1000\n";
            detail_net::send_all(fd, payload.data(), payload.size());
            ::close(fd);
        });
        CHECK_THROWS_AS(StreamSubscriber("127.0.0.1", ntohs(addr.sin_port)), ProtocolError);
        fake.join();
        ::close(listener);
    }
}
