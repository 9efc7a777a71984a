// Processing element for task `fib__cont0`.
//
// Interface contract assumed of the scheduler:
//   arg_in            one argument struct (or closure) per task instance.
//                     Void tasks receive it wrapped with `done_dest`, the
//                     destination their completion is reported to.
//   spawn_<t>         enqueues a new instance of task <t>.
//   spawn_next_<c>    write-buffer record issuing continuation closure <c>.
//   send_arg_<c>      write-buffer record delivering a result to a closure
//                     of continuation <c>; host_out delivers to the host.
//   alloc_req/resp    allocates a closure with an initial join count.
//   join_inc          adds one expected child to the given destination.
// Write-buffer records start with {kind, dest_task, payload_bytes}.
// Destinations pack the task index in bits 63..56, the closure address in
// bits 55..8 and the field index in bits 7..0 (0xFF: counter only).
#include <hls_stream.h>
#include <stdint.h>

static const uint8_t TASK_FIB = 0;
static const uint8_t TASK_FIB__CONT0 = 1;
static const uint8_t TASK_HOST = 255;
static const uint8_t WB_SPAWN_NEXT = 0;
static const uint8_t WB_SEND_ARGUMENT = 1;
static const uint64_t FIELD_COUNTER_ONLY = 0xFF;

static inline uint64_t cilk_dest(uint8_t task, uint64_t closure, uint64_t field) {
    return ((uint64_t)task << 56) | ((closure & 0xFFFFFFFFFFFFull) << 8) | (field & 0xFF);
}

static inline uint8_t cilk_dest_task(uint64_t dest) {
    return (uint8_t)(dest >> 56);
}

static inline uint64_t cilk_counter_only(uint64_t dest) {
    return dest | FIELD_COUNTER_ONLY;
}

struct fib__cont0_closure {
    uint64_t ret_dest;
    int64_t x;
    int64_t y;
    uint8_t _pad[8];
};
static_assert(sizeof(fib__cont0_closure) == 32, "fib__cont0_closure must be 256 bits");

struct wb_send_argument {
    uint8_t kind;
    uint8_t dest_task;
    uint16_t payload_bytes;
    uint64_t dest;
    int64_t value;
};

void pe_fib__cont0(
    hls::stream<fib__cont0_closure> &arg_in,
    hls::stream<wb_send_argument> &send_arg_fib__cont0,
    hls::stream<wb_send_argument> &host_out) {
#pragma HLS INTERFACE mode=axis port=arg_in
#pragma HLS INTERFACE mode=axis port=send_arg_fib__cont0
#pragma HLS INTERFACE mode=axis port=host_out
    fib__cont0_closure cilk_in = arg_in.read();
    uint64_t cilk_ret = cilk_in.ret_dest;
    int64_t x = cilk_in.x;
    int64_t y = cilk_in.y;

    {
        wb_send_argument cilk_rec;
        cilk_rec.kind = WB_SEND_ARGUMENT;
        cilk_rec.dest_task = cilk_dest_task(cilk_ret);
        cilk_rec.payload_bytes = 8;
        cilk_rec.dest = cilk_ret;
        cilk_rec.value = x + y;
        switch (cilk_rec.dest_task) {
        case TASK_FIB__CONT0:
            send_arg_fib__cont0.write(cilk_rec);
            break;
        default:
            host_out.write(cilk_rec);
            break;
        }
    }
    return;
}
