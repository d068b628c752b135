use std::io;

use crate::error::{Error, Result};

/// Pins the calling thread to `core`.
pub fn pin_current_thread(core: usize) -> Result<()> {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        if core >= libc::CPU_SETSIZE as usize {
            return Err(Error::Affinity {
                core,
                source: io::Error::from_raw_os_error(libc::EINVAL),
            });
        }
        libc::CPU_SET(core, &mut set);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
            return Err(Error::Affinity {
                core,
                source: io::Error::last_os_error(),
            });
        }
    }
    Ok(())
}

/// Cores this process may run on.
pub fn allowed_cores() -> Vec<usize> {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return Vec::new();
        }
        (0..libc::CPU_SETSIZE as usize)
            .filter(|&c| libc::CPU_ISSET(c, &set))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pin_to_an_allowed_core_succeeds() {
        let cores = allowed_cores();
        assert!(!cores.is_empty());
        std::thread::spawn(move || pin_current_thread(cores[0]))
            .join()
            .unwrap()
            .unwrap();
    }

    #[test]
    fn pin_to_a_missing_core_fails() {
        let err = std::thread::spawn(|| pin_current_thread(100_000))
            .join()
            .unwrap();
        assert!(matches!(err, Err(Error::Affinity { core: 100_000, .. })));
    }
}
