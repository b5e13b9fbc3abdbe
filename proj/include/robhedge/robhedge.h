#ifndef ROBHEDGE_H
#define ROBHEDGE_H

/* C interface to the robhedge solvers. Handles are opaque; every fallible
 * call returns an rh_status and leaves a message in rh_last_error() (per
 * thread) when it fails. Strings returned through out-parameters are owned
 * by the caller and released with rh_string_free. */

#include <stddef.h>

#if defined(_WIN32)
#define RH_API __declspec(dllexport)
#elif defined(__GNUC__)
#define RH_API __attribute__((visibility("default")))
#else
#define RH_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 0..3 double as CLI exit codes. */
typedef enum rh_status {
  RH_OK = 0,
  RH_ERR_VALIDATION = 1,
  RH_NONVIABLE = 2,
  RH_ERR_SOLVER = 3,
  RH_ERR_ARGUMENT = 4,
  RH_ERR_INTERNAL = 5
} rh_status;

typedef struct rh_instance rh_instance;
typedef struct rh_report rh_report;

RH_API const char* rh_version(void);
RH_API const char* rh_status_name(rh_status status);

/* Message of the last failed call on this thread; "" when none. */
RH_API const char* rh_last_error(void);
/* Field path of the last validation failure on this thread; "" when none. */
RH_API const char* rh_last_error_path(void);

RH_API rh_status rh_instance_parse(const char* json, size_t length, rh_instance** out);
RH_API rh_status rh_instance_load(const char* path, rh_instance** out);
RH_API void rh_instance_free(rh_instance* instance);

/* Admissibility floor c >= 0; a negative value clears it. */
RH_API rh_status rh_instance_set_floor(rh_instance* instance, double c);
RH_API rh_status rh_instance_set_tolerance(rh_instance* instance, double tol);
RH_API rh_status rh_instance_serialize(const rh_instance* instance, char** out);

/* Number of commands and their names ("price", "oracle.vertices", ...). */
RH_API size_t rh_command_count(void);
RH_API const char* rh_command_name(size_t index);

/* Runs a command. On RH_OK, RH_NONVIABLE and RH_ERR_SOLVER a report is
 * produced (a solver failure report may carry partial results); the return
 * value is the report status. Validation errors yield no report. */
RH_API rh_status rh_run(const rh_instance* instance, const char* command, rh_report** out);
RH_API rh_status rh_report_status(const rh_report* report);
/* Borrowed; valid until rh_report_free. */
RH_API const char* rh_report_json(const rh_report* report);
RH_API void rh_report_free(rh_report* report);

/* JSON error document for a failed run. */
RH_API rh_status rh_error_json(const char* command, rh_status status, char** out);

RH_API void rh_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
