//! Append-only CSV log of finished trials, shared by all sessions.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use depthnav::harness::{write_csv, TrialRecord};

use crate::error::ServiceError;

pub struct TrialLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl TrialLog {
    /// Opens `path` for appending; a new or empty file gets the header row.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let io_err = |source| depthnav::Error::Io { path: path.to_path_buf(), source };
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        if file.metadata().map_err(io_err)?.len() == 0 {
            write_csv(&file, &[], true)?;
        }
        Ok(TrialLog { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &TrialRecord) -> Result<(), ServiceError> {
        let file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        write_csv(&*file, std::slice::from_ref(record), false)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use depthnav::Modality;

    #[test]
    fn header_is_written_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let record = TrialRecord {
            modality: Modality::Tactile,
            path: 1,
            seed: 7,
            trial_index: 2,
            tt_s: 12.3,
            noc: 1,
            reached_goal: true,
        };
        TrialLog::open(&path).unwrap().append(&record).unwrap();
        TrialLog::open(&path).unwrap().append(&record).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "modality,path,seed,trial_index,tt_s,noc,reached_goal\n\
             tactile,1,7,2,12.3,1,true\n\
             tactile,1,7,2,12.3,1,true\n"
        );
    }
}
