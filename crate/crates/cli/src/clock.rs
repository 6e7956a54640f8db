//! Per-method cost accounting for the `cpu_seconds` column.

use std::fmt;
use std::str::FromStr;

/// How sampling cost is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    /// CPU time of the calling thread (of the whole process when sweeps use
    /// worker threads).
    #[default]
    Cpu,
    /// Deterministic: density evaluations times a fixed unit cost.
    Work,
}

impl FromStr for ClockMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" => Ok(ClockMode::Cpu),
            "work" => Ok(ClockMode::Work),
            other => Err(format!("unknown clock `{other}` (expected cpu|work)")),
        }
    }
}

impl fmt::Display for ClockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClockMode::Cpu => "cpu",
            ClockMode::Work => "work",
        })
    }
}

fn cpu_time(clock: libc::clockid_t) -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(clock, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

pub fn thread_cpu_seconds() -> f64 {
    cpu_time(libc::CLOCK_THREAD_CPUTIME_ID)
}

pub fn process_cpu_seconds() -> f64 {
    cpu_time(libc::CLOCK_PROCESS_CPUTIME_ID)
}

/// Accumulated sampling cost of one method. Only time spent inside
/// [`MethodClock::measure`] counts, so diagnostics do not inflate it.
#[derive(Debug, Clone)]
pub struct MethodClock {
    mode: ClockMode,
    unit: f64,
    whole_process: bool,
    seconds: f64,
}

impl MethodClock {
    pub fn new(mode: ClockMode, work_unit_seconds: f64, whole_process: bool) -> Self {
        MethodClock {
            mode,
            unit: work_unit_seconds,
            whole_process,
            seconds: 0.0,
        }
    }

    fn now(&self) -> f64 {
        if self.whole_process {
            process_cpu_seconds()
        } else {
            thread_cpu_seconds()
        }
    }

    /// Runs `f`, which returns its result and the number of density
    /// evaluations it made, and charges its cost.
    pub fn measure<T, E>(&mut self, f: impl FnOnce() -> Result<(T, u64), E>) -> Result<T, E> {
        match self.mode {
            ClockMode::Cpu => {
                let start = self.now();
                let (out, _) = f()?;
                self.seconds += (self.now() - start).max(0.0);
                Ok(out)
            }
            ClockMode::Work => {
                let (out, evaluations) = f()?;
                self.seconds += evaluations as f64 * self.unit;
                Ok(out)
            }
        }
    }

    pub fn seconds(&self) -> f64 {
        self.seconds
    }
}
