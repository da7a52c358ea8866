//! Reference results for the ten (personnel, department) exchanges of the
//! experiment, and the matching department DB fixture.

use crate::codec::IntList;
use crate::party::PartyId;
use crate::policy::{DepartmentDb, PolicyError};

/// The shipped department DB for the ten exchanges.
pub const FIXTURE_JSON: &str = include_str!("../../../fixtures/table1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Table1Row {
    pub personnel: &'static str,
    pub department: &'static str,
    pub grade: u32,
    pub obtainable: &'static [i64],
    pub shared: &'static [i64],
}

impl Table1Row {
    pub fn personnel_id(&self) -> PartyId {
        PartyId::new(self.personnel).expect("valid id")
    }

    pub fn department_id(&self) -> PartyId {
        PartyId::new(self.department).expect("valid id")
    }

    pub fn expected(&self) -> IntList {
        IntList(self.shared.to_vec())
    }
}

pub const ROWS: [Table1Row; 10] = [
    Table1Row {
        personnel: "SP1",
        department: "IB",
        grade: 1,
        obtainable: &[23, 37, 39, 43, 38, 37, 24, 38, 35, 29, 40, 31, 33, 76, 48, 21, 52, 67, 52, 71, 49, 26, 15, 38, 24],
        shared: &[37, 24, 38, 35, 29, 40, 31],
    },
    Table1Row {
        personnel: "SP1",
        department: "CBI",
        grade: 2,
        obtainable: &[39, 33, 46, 56, 74, 46, 49, 50, 59, 14, 6, 18, 29, 43, 67, 45, 69, 58, 60],
        shared: &[14, 6, 18, 29, 43],
    },
    Table1Row {
        personnel: "SP1",
        department: "NCB",
        grade: 3,
        obtainable: &[39, 35, 42, 57, 65, 49, 52, 64, 77, 87, 90, 78, 64, 59, 73, 75, 68, 13, 17, 19, 24, 29],
        shared: &[49, 52, 64, 77, 87, 90],
    },
    Table1Row {
        personnel: "SP2",
        department: "CBI",
        grade: 1,
        obtainable: &[19, 17, 36, 14, 23, 35, 47, 34, 63, 31, 22, 40, 19, 12, 26, 18, 13, 17, 27, 46, 23, 25, 18, 29, 30],
        shared: &[19, 12, 26, 18, 13, 17],
    },
    Table1Row {
        personnel: "SP2",
        department: "CID",
        grade: 3,
        obtainable: &[62, 68, 65, 54, 57, 34, 31, 30, 28, 26, 7, 16, 13, 27, 29, 44, 47, 54, 52, 39],
        shared: &[7, 16, 13, 27, 29],
    },
    Table1Row {
        personnel: "SP3",
        department: "CID",
        grade: 3,
        obtainable: &[62, 68, 65, 54, 57, 34, 31, 30, 28, 26, 7, 16, 13, 27, 29, 44, 47, 54, 52, 39],
        shared: &[44, 47, 54, 52, 39],
    },
    Table1Row {
        personnel: "SP3",
        department: "IB",
        grade: 2,
        obtainable: &[15, 9, 17, 28, 30, 85, 31, 17, 49, 27, 32, 46, 26, 23, 25, 28, 22, 29, 30, 12, 7, 19, 13, 28, 31],
        shared: &[12, 7, 19, 13, 28, 31],
    },
    Table1Row {
        personnel: "SP3",
        department: "NCB",
        grade: 1,
        obtainable: &[11, 26, 33, 15, 17, 45, 13, 17, 18, 28, 24, 32, 7, 48, 26, 45, 76, 82, 37, 21, 28, 17, 19, 25],
        shared: &[13, 17, 18, 28, 24, 32],
    },
    Table1Row {
        personnel: "SP4",
        department: "CBI",
        grade: 2,
        obtainable: &[39, 33, 46, 56, 74, 46, 49, 50, 59, 14, 6, 18, 29, 43, 67, 45, 69, 58, 60],
        shared: &[39, 33, 46, 56, 74, 46, 49, 50, 59],
    },
    Table1Row {
        personnel: "SP4",
        department: "IB",
        grade: 1,
        obtainable: &[23, 37, 39, 43, 38, 37, 24, 38, 35, 29, 40, 31, 33, 76, 48, 21, 52, 67, 52, 71, 49, 26, 15, 38, 24],
        shared: &[37, 24, 38, 35, 29, 40, 31],
    },
];

pub fn fixture_db() -> Result<DepartmentDb, PolicyError> {
    DepartmentDb::from_json_str(FIXTURE_JSON)
}

/// One line per row: `ok` or the expected/actual pair that differs.
pub fn diff(answers: &[Option<IntList>]) -> Vec<String> {
    ROWS.iter()
        .enumerate()
        .map(|(i, row)| {
            let label = format!("row {:>2} {}/{}", i + 1, row.personnel, row.department);
            match answers.get(i).and_then(Option::as_ref) {
                Some(got) if *got == row.expected() => format!("{label}: ok {got}"),
                Some(got) => format!("{label}: MISMATCH expected {} got {got}", row.expected()),
                None => format!("{label}: MISSING expected {}", row.expected()),
            }
        })
        .collect()
}
