// Exercises the shared-library surface the way an external binding would:
// opaque handles, status codes, and owned strings only.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "moesim.h"

#define CHECK(cond)                                                                   \
    do {                                                                              \
        if (!(cond)) {                                                                \
            std::fprintf(stderr, "CHECK FAILED: %s (%s:%d)\n", #cond, __FILE__, __LINE__); \
            std::exit(1);                                                             \
        }                                                                             \
    } while (0)

static void test_version_and_errors() {
    CHECK(std::strlen(moesim_version()) > 0);

    moesim_config* cfg = nullptr;
    CHECK(moesim_config_load("/no/such/config.json", &cfg) == MOESIM_ERR_CONFIG);
    CHECK(std::strlen(moesim_last_error()) > 0);
    CHECK(moesim_config_load(nullptr, &cfg) == MOESIM_ERR_INVALID_ARG);
    std::printf("  [PASS] version_and_errors\n");
}

static void test_run_roundtrip() {
    moesim_config* cfg = nullptr;
    CHECK(moesim_config_default(&cfg) == MOESIM_OK);

    char* dump = nullptr;
    CHECK(moesim_config_dump(cfg, &dump) == MOESIM_OK);
    CHECK(std::strstr(dump, "decode_ep_degree") != nullptr);

    // Re-parse the dump: the serialized config must round-trip strictly.
    moesim_config* reparsed = nullptr;
    CHECK(moesim_config_parse(dump, &reparsed) == MOESIM_OK);
    moesim_string_free(dump);

    moesim_report* report = nullptr;
    CHECK(moesim_run(reparsed, &report) == MOESIM_OK);
    char* json = nullptr;
    CHECK(moesim_report_json(report, &json) == MOESIM_OK);
    CHECK(std::strstr(json, "tpot_ms") != nullptr);
    CHECK(std::strstr(json, "trace_hash") != nullptr);

    moesim_string_free(json);
    moesim_report_free(report);
    moesim_config_free(reparsed);
    moesim_config_free(cfg);
    std::printf("  [PASS] run_roundtrip\n");
}

static void test_sweep_csv() {
    moesim_config* cfg = nullptr;
    CHECK(moesim_config_default(&cfg) == MOESIM_OK);
    double values[] = {8.0, 24.0, 96.0};
    moesim_report* report = nullptr;
    CHECK(moesim_sweep(cfg, "deployment.decode_batch_per_die", values, 3, 1, &report) == MOESIM_OK);
    char* csv = nullptr;
    CHECK(moesim_report_csv(report, &csv) == MOESIM_OK);
    CHECK(std::strstr(csv, "deployment.decode_batch_per_die") != nullptr);
    CHECK(std::strstr(csv, "tpot_ms") != nullptr);
    moesim_string_free(csv);
    moesim_report_free(report);

    CHECK(moesim_sweep(cfg, "bogus.axis", values, 3, 0, &report) == MOESIM_ERR_CONFIG);
    moesim_config_free(cfg);
    std::printf("  [PASS] sweep_csv\n");
}

static void test_pd_map() {
    char* csv = nullptr;
    CHECK(moesim_pd_map(16, 4, 8, &csv) == MOESIM_OK);
    CHECK(std::strstr(csv, "5,3,11") != nullptr);  // hand-derived spot value
    moesim_string_free(csv);
    CHECK(moesim_pd_map(16, 3, 8, &csv) == MOESIM_ERR_VALIDATION);
    std::printf("  [PASS] pd_map\n");
}

static void test_quantize_and_calibrate_files() {
    const char* matrix_path = "/tmp/moesim_capi_matrix.txt";
    std::FILE* f = std::fopen(matrix_path, "w");
    CHECK(f != nullptr);
    std::fputs("2 3\n1.0 -2.0 3.0\n0.5 0.25 -0.125\n", f);
    std::fclose(f);

    char* json = nullptr;
    CHECK(moesim_quantize_file(matrix_path, "token", &json) == MOESIM_OK);
    CHECK(std::strstr(json, "\"half_scale_bound_satisfied\": true") != nullptr);
    moesim_string_free(json);
    CHECK(moesim_quantize_file(matrix_path, "bogus", &json) == MOESIM_ERR_INVALID_ARG);

    const char* csv_path = "/tmp/moesim_capi_cal.csv";
    f = std::fopen(csv_path, "w");
    CHECK(f != nullptr);
    std::fputs("# ep_degree,latency_us,bandwidth_gbps\n8,116,71\n256,152,54\n", f);
    std::fclose(f);
    CHECK(moesim_calibrate_plane_csv(csv_path, &json) == MOESIM_OK);
    CHECK(std::strstr(json, "eff_bandwidth_gbps") != nullptr);
    moesim_string_free(json);
    std::printf("  [PASS] quantize_and_calibrate_files\n");
}

static void test_validate_tables() {
    char* text = nullptr;
    int all_passed = 0;
    CHECK(moesim_validate_tables(nullptr, &text, &all_passed) == MOESIM_OK);
    CHECK(all_passed == 1);
    CHECK(std::strstr(text, "PASS") != nullptr);
    moesim_string_free(text);
    std::printf("  [PASS] validate_tables\n");
}

int main() {
    test_version_and_errors();
    test_run_roundtrip();
    test_sweep_csv();
    test_pd_map();
    test_quantize_and_calibrate_files();
    test_validate_tables();
    std::printf("capi: all tests passed\n");
    return 0;
}
