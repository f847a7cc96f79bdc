//! Memory-mapped output devices.

/// A window of device registers. A byte written to the print port is
/// appended to the output stream; any write to the halt port stops the
/// machine. Reads from the window return zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeviceMap {
    pub base: u32,
    pub len: u32,
    pub print_offset: u32,
    pub halt_offset: u32,
}

impl Default for DeviceMap {
    fn default() -> Self {
        DeviceMap { base: 0xb000_0000, len: 0x100, print_offset: 0x00, halt_offset: 0x10 }
    }
}

impl DeviceMap {
    pub fn contains(&self, addr: u32) -> bool {
        addr.wrapping_sub(self.base) < self.len
    }

    pub fn print_port(&self) -> u32 {
        self.base.wrapping_add(self.print_offset)
    }

    pub fn halt_port(&self) -> u32 {
        self.base.wrapping_add(self.halt_offset)
    }
}
