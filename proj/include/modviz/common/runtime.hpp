#pragma once

namespace modviz {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates tens of MB per batch; without this most of the time
/// goes to page faults. No effect outside glibc.
void tune_allocator();

/// Flushes subnormal floats to zero on the calling thread while alive
/// (x86 FTZ and DAZ), restoring the previous mode on exit. Late in training
/// the Adam moments and many gradients drift into the subnormal range,
/// where every arithmetic op costs a microcode assist.
class FlushDenormals {
 public:
  FlushDenormals();
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

/// Floating-point control state of the calling thread, and a setter, so
/// worker threads can run in the same mode as the thread that spawned them.
unsigned fp_control();
void set_fp_control(unsigned state);

}  // namespace modviz
