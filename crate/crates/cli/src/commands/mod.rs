pub mod classdrift;
pub mod effects;
pub mod ingest;
pub mod rank;
pub mod schemediff;
pub mod synth;
pub mod table2;
pub mod trends;
