/** Entry point: mount the rater on #app and auto-resume after a refresh. */

import { StudyClient } from "./api";
import { createRaterUi } from "./ui";

const params = new URLSearchParams(window.location.search);
const studyId = params.get("study") ?? document.body.dataset.study ?? "study";
const baseUrl = params.get("api") ?? "";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const ui = createRaterUi(root, new StudyClient(baseUrl), { studyId });

const STORAGE_KEY = "rater:username";

ui.controller.subscribe((state) => {
  if (state.screen !== "login" && state.subjectId) {
    window.sessionStorage.setItem(STORAGE_KEY, state.subjectId);
  }
});

// Accepted ratings live on the server, so resuming the same name after a
// refresh lands exactly at the server's cursor.
const savedName = window.sessionStorage.getItem(STORAGE_KEY);
if (savedName) {
  void ui.controller.login(studyId, savedName);
}
