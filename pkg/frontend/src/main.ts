import { GatewayClient } from "./api.js";
import { ConsoleController } from "./console.js";
import { mountConsole } from "./ui.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("gateway") ?? window.location.origin;
  const client = new GatewayClient(base);
  const controller = new ConsoleController(client);

  const root = document.getElementById("console");
  if (!root) throw new Error("missing #console element");

  let sceneIds: string[] = [];
  try {
    sceneIds = (await client.listScenes()).scene_ids;
  } catch {
    // gateway without a scene pool; operator can still not pick a scene,
    // so surface that instead of a dead dropdown
    root.textContent = `no scenes available from ${base}`;
    return;
  }
  mountConsole(root, controller, sceneIds);
}

void boot();
