//! Local stand-ins for the services the pipeline talks to, plus data
//! generators and reference implementations for tests.

pub mod fixtures;
pub mod market;
pub mod oracle;
pub mod records;
pub mod s3;
pub mod zeroshot;

use std::net::SocketAddr;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// A server bound to an ephemeral loopback port; stops on drop.
pub struct Running {
    pub addr: SocketAddr,
    task: JoinHandle<()>,
}

impl Running {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub(crate) async fn serve(router: axum::Router) -> Running {
    let listener = TcpListener::bind("127.0.0.1:0").await.expect("bind loopback");
    let addr = listener.local_addr().expect("local addr");
    let task = tokio::spawn(async move {
        axum::serve(listener, router).await.expect("fixture server");
    });
    Running { addr, task }
}
